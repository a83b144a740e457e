//! Single-file binary model container.
//!
//! Layout: magic `FBTW`, little-endian `u32` format version, then tagged
//! sections `[tag: 4 bytes][len: u64][payload]` ending with an `END ` section.
//! Every real is stored as an IEEE-754 `f64`. See `docs/model_format.md`.

use std::fs;
use std::path::Path;

use crate::binary::{BinaryModel, Hyperparams};
use crate::dag::{node_count, DagModel};
use crate::error::{Error, Result};
use crate::fuzzy::{ClassGeometry, FuzzyParams};
use crate::incremental::{Forgetting, ForgettingState, ScreenPolicy};
use crate::linalg::Matrix;
use crate::rff::{FeatureMap, FourierMap};
use crate::scalar::Real;
use crate::solver::{GradientBand, SolverConfig};

pub const MAGIC: &[u8; 4] = b"FBTW";
pub const FORMAT_VERSION: u32 = 1;

const TAG_MAP: &[u8; 4] = b"MAP ";
const TAG_HYPER: &[u8; 4] = b"HYPR";
const TAG_CLASSES: &[u8; 4] = b"CLSS";
const TAG_NODE: &[u8; 4] = b"NODE";
const TAG_END: &[u8; 4] = b"END ";

#[derive(Default)]
struct Writer {
    buf: Vec<u8>,
}

impl Writer {
    fn u8(&mut self, v: u8) {
        self.buf.push(v);
    }
    fn u32(&mut self, v: u32) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }
    fn u64(&mut self, v: u64) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }
    fn len(&mut self, v: usize) {
        self.u64(v as u64);
    }
    fn real<T: Real>(&mut self, v: T) {
        self.buf.extend_from_slice(&v.as_f64().to_le_bytes());
    }
    fn reals<T: Real>(&mut self, v: &[T]) {
        self.len(v.len());
        v.iter().for_each(|&x| self.real(x));
    }
    fn matrix<T: Real>(&mut self, m: &Matrix<T>) {
        self.len(m.rows());
        self.len(m.cols());
        m.as_slice().iter().for_each(|&x| self.real(x));
    }
    fn section(&mut self, tag: &[u8; 4], payload: Writer) {
        self.buf.extend_from_slice(tag);
        self.len(payload.buf.len());
        self.buf.extend_from_slice(&payload.buf);
    }
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

fn corrupt(msg: impl Into<String>) -> Error {
    Error::Corrupt(msg.into())
}

impl<'a> Reader<'a> {
    fn new(buf: &'a [u8]) -> Self {
        Reader { buf, pos: 0 }
    }
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.buf.len())
            .ok_or_else(|| corrupt(format!("truncated at byte {}", self.pos)))?;
        let s = &self.buf[self.pos..end];
        self.pos = end;
        Ok(s)
    }
    fn done(&self) -> bool {
        self.pos == self.buf.len()
    }
    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }
    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }
    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
    fn len(&mut self) -> Result<usize> {
        let v = self.u64()?;
        // Every counted item is at least one byte, so a count beyond the
        // remaining input is corrupt rather than an allocation request.
        usize::try_from(v)
            .ok()
            .filter(|&n| n <= self.buf.len() - self.pos)
            .ok_or_else(|| corrupt(format!("length {v} exceeds input")))
    }
    /// A size that does not count following items, e.g. a dimension.
    fn size(&mut self) -> Result<usize> {
        let v = self.u64()?;
        usize::try_from(v).map_err(|_| corrupt(format!("size {v} out of range")))
    }
    fn real<T: Real>(&mut self) -> Result<T> {
        let v = f64::from_le_bytes(self.take(8)?.try_into().unwrap());
        Ok(T::lit(v))
    }
    fn reals<T: Real>(&mut self) -> Result<Vec<T>> {
        let n = self.len()?;
        (0..n).map(|_| self.real()).collect()
    }
    fn matrix<T: Real>(&mut self) -> Result<Matrix<T>> {
        let rows = self.size()?;
        let cols = self.size()?;
        let n = rows
            .checked_mul(cols)
            .filter(|&n| n <= (self.buf.len() - self.pos) / 8)
            .ok_or_else(|| corrupt("matrix larger than input"))?;
        let data = (0..n).map(|_| self.real()).collect::<Result<Vec<T>>>()?;
        if cols == 0 && rows > 0 {
            return Err(corrupt("matrix with rows but no columns"));
        }
        Matrix::from_vec(rows, cols, data)
    }
    fn section(&mut self, tag: &[u8; 4]) -> Result<Reader<'a>> {
        let got = self.take(4)?;
        if got != tag {
            return Err(corrupt(format!(
                "expected section {:?}, found {:?}",
                String::from_utf8_lossy(tag),
                String::from_utf8_lossy(got)
            )));
        }
        let n = self.len()?;
        Ok(Reader::new(self.take(n)?))
    }
    fn finish(self, what: &str) -> Result<()> {
        if self.done() {
            Ok(())
        } else {
            Err(corrupt(format!("trailing bytes in {what} section")))
        }
    }
}

fn policy_code(p: ScreenPolicy) -> u8 {
    ScreenPolicy::ALL.iter().position(|&q| q == p).unwrap() as u8
}

fn write_map<T: Real>(m: &FeatureMap<T>) -> Writer {
    let mut w = Writer::default();
    match m {
        FeatureMap::Linear { input_dim } => {
            w.u8(0);
            w.len(*input_dim);
        }
        FeatureMap::Fourier(f) => {
            w.u8(1);
            w.len(f.input_dim());
            w.len(f.features());
            w.real(f.gamma);
            f.tau.as_slice().iter().for_each(|&x| w.real(x));
            f.offsets.iter().for_each(|&x| w.real(x));
        }
    }
    w
}

fn read_map<T: Real>(r: &mut Reader) -> Result<FeatureMap<T>> {
    match r.u8()? {
        0 => Ok(FeatureMap::Linear {
            input_dim: r.size()?,
        }),
        1 => {
            let n = r.size()?;
            let features = r.size()?;
            let gamma = r.real()?;
            let count = n
                .checked_mul(features)
                .filter(|&c| c <= r.buf.len() / 8)
                .ok_or_else(|| corrupt("feature map larger than input"))?;
            let tau = (0..count).map(|_| r.real()).collect::<Result<Vec<T>>>()?;
            let offsets = (0..features)
                .map(|_| r.real())
                .collect::<Result<Vec<T>>>()?;
            Ok(FeatureMap::Fourier(FourierMap {
                tau: Matrix::from_vec(features, n, tau)?,
                offsets,
                gamma,
            }))
        }
        k => Err(corrupt(format!("unknown feature map kind {k}"))),
    }
}

fn write_hyper<T: Real>(hp: &Hyperparams<T>, policy: ScreenPolicy) -> Writer {
    let mut w = Writer::default();
    for c in [
        hp.c1,
        hp.c2,
        hp.c3,
        hp.c4,
        hp.fuzzy.mu,
        hp.fuzzy.delta,
        hp.solver.epsilon,
    ] {
        w.real(c);
    }
    w.len(hp.solver.max_sweeps);
    w.real(hp.solver.shrink_rate);
    w.u64(hp.solver.seed);
    w.u32(hp.forgetting.d.unwrap_or(0));
    w.real(hp.forgetting.phi);
    w.u8(policy_code(policy));
    w
}

fn read_hyper<T: Real>(r: &mut Reader) -> Result<(Hyperparams<T>, ScreenPolicy)> {
    let mut c = [T::zero(); 7];
    for v in &mut c {
        *v = r.real()?;
    }
    let max_sweeps = r.u64()? as usize;
    let shrink_rate = r.real()?;
    let seed = r.u64()?;
    let d = r.u32()?;
    let phi = r.real()?;
    let policy = *ScreenPolicy::ALL
        .get(r.u8()? as usize)
        .ok_or_else(|| corrupt("unknown screening policy"))?;
    let hp = Hyperparams {
        c1: c[0],
        c2: c[1],
        c3: c[2],
        c4: c[3],
        fuzzy: FuzzyParams {
            mu: c[4],
            delta: c[5],
        },
        solver: SolverConfig {
            epsilon: c[6],
            max_sweeps,
            shrink_rate,
            seed,
        },
        forgetting: Forgetting {
            d: (d > 0).then_some(d),
            phi,
        },
    };
    hp.validate()
        .map_err(|e| corrupt(format!("hyperparameters: {e}")))?;
    Ok((hp, policy))
}

fn write_band<T: Real>(w: &mut Writer, b: &GradientBand<T>) {
    for v in [
        b.min_prime,
        b.max_prime,
        b.mean.0,
        b.mean.1,
        b.median.0,
        b.median.1,
        b.quartiles.0,
        b.quartiles.1,
    ] {
        w.real(v);
    }
}

fn read_band<T: Real>(r: &mut Reader) -> Result<GradientBand<T>> {
    let mut v = [T::zero(); 8];
    for x in &mut v {
        *x = r.real()?;
    }
    Ok(GradientBand {
        min_prime: v[0],
        max_prime: v[1],
        mean: (v[2], v[3]),
        median: (v[4], v[5]),
        quartiles: (v[6], v[7]),
    })
}

fn write_counts(w: &mut Writer, f: &ForgettingState) {
    w.len(f.counts.len());
    f.counts.iter().for_each(|&c| w.u32(c));
}

fn read_counts(r: &mut Reader) -> Result<ForgettingState> {
    let n = r.len()?;
    Ok(ForgettingState {
        counts: (0..n).map(|_| r.u32()).collect::<Result<_>>()?,
    })
}

fn write_node<T: Real>(n: &BinaryModel<T>) -> Writer {
    let mut w = Writer::default();
    w.reals(&n.u_plus);
    w.reals(&n.u_minus);
    w.reals(&n.alpha);
    w.reals(&n.nu);
    w.matrix(&n.retained_pos);
    w.matrix(&n.retained_neg);
    w.reals(&n.s_pos);
    w.reals(&n.s_neg);
    for g in [&n.geom_pos, &n.geom_neg] {
        w.reals(&g.center);
        w.real(g.radius);
    }
    write_band(&mut w, &n.band_plus);
    write_band(&mut w, &n.band_minus);
    write_counts(&mut w, &n.forget_pos);
    write_counts(&mut w, &n.forget_neg);
    w.u8(n.converged as u8 | (n.degenerate as u8) << 1 | (n.stale as u8) << 2);
    w.u64(n.updates);
    w.u64(n.solves);
    w.u64(n.seed);
    w
}

fn read_node<T: Real>(r: &mut Reader, dim: usize) -> Result<BinaryModel<T>> {
    let u_plus = r.reals()?;
    let u_minus = r.reals()?;
    let alpha = r.reals()?;
    let nu = r.reals()?;
    let retained_pos = r.matrix()?;
    let retained_neg = r.matrix()?;
    let s_pos = r.reals()?;
    let s_neg = r.reals()?;
    let mut geom = || -> Result<ClassGeometry<T>> {
        Ok(ClassGeometry {
            center: r.reals()?,
            radius: r.real()?,
        })
    };
    let geom_pos = geom()?;
    let geom_neg = geom()?;
    let band_plus = read_band(r)?;
    let band_minus = read_band(r)?;
    let forget_pos = read_counts(r)?;
    let forget_neg = read_counts(r)?;
    let flags = r.u8()?;
    let updates = r.u64()?;
    let solves = r.u64()?;
    let seed = r.u64()?;

    let (lp, ln) = (retained_pos.rows(), retained_neg.rows());
    let consistent = u_plus.len() == dim + 1
        && u_minus.len() == dim + 1
        && retained_pos.cols() == dim
        && retained_neg.cols() == dim
        && lp > 0
        && ln > 0
        && nu.len() == lp
        && s_pos.len() == lp
        && forget_pos.counts.len() == lp
        && alpha.len() == ln
        && s_neg.len() == ln
        && forget_neg.counts.len() == ln
        && geom_pos.center.len() == dim
        && geom_neg.center.len() == dim;
    if !consistent {
        return Err(corrupt("node arrays have inconsistent sizes"));
    }
    Ok(BinaryModel {
        u_plus,
        u_minus,
        alpha,
        nu,
        retained_pos,
        retained_neg,
        s_pos,
        s_neg,
        geom_pos,
        geom_neg,
        band_plus,
        band_minus,
        forget_pos,
        forget_neg,
        converged: flags & 1 != 0,
        degenerate: flags & 2 != 0,
        updates,
        solves,
        seed,
        stale: flags & 4 != 0,
    })
}

/// Serializes a model to the container format.
pub fn to_bytes<T: Real>(m: &DagModel<T>) -> Vec<u8> {
    let mut w = Writer::default();
    w.buf.extend_from_slice(MAGIC);
    w.u32(FORMAT_VERSION);
    w.section(TAG_MAP, write_map(&m.feature_map));
    w.section(TAG_HYPER, write_hyper(&m.hp, m.policy));
    let mut c = Writer::default();
    c.len(m.classes.len());
    m.classes.iter().for_each(|&l| c.u32(l));
    w.section(TAG_CLASSES, c);
    for n in &m.nodes {
        w.section(TAG_NODE, write_node(n));
    }
    w.section(TAG_END, Writer::default());
    w.buf
}

/// Parses a container produced by [`to_bytes`].
pub fn from_bytes<T: Real>(buf: &[u8]) -> Result<DagModel<T>> {
    if buf.len() < 4 || &buf[..4] != MAGIC {
        return Err(Error::NotAModel);
    }
    let mut r = Reader::new(&buf[4..]);
    let version = r.u32()?;
    if version != FORMAT_VERSION {
        return Err(Error::Version(version));
    }
    let mut s = r.section(TAG_MAP)?;
    let feature_map = read_map(&mut s)?;
    s.finish("map")?;
    let mut s = r.section(TAG_HYPER)?;
    let (hp, policy) = read_hyper(&mut s)?;
    s.finish("hyperparameter")?;
    let mut s = r.section(TAG_CLASSES)?;
    let u = s.len()?;
    let classes = (0..u).map(|_| s.u32()).collect::<Result<Vec<_>>>()?;
    s.finish("class")?;
    if u < 2 || classes.windows(2).any(|w| w[0] >= w[1]) || classes[0] == 0 {
        return Err(corrupt(
            "class list must hold at least 2 sorted distinct labels",
        ));
    }
    let dim = feature_map.output_dim();
    let nodes = (0..node_count(u))
        .map(|_| {
            let mut s = r.section(TAG_NODE)?;
            let n = read_node(&mut s, dim)?;
            s.finish("node")?;
            Ok(n)
        })
        .collect::<Result<Vec<_>>>()?;
    r.section(TAG_END)?.finish("end")?;
    if !r.done() {
        return Err(corrupt("bytes after end section"));
    }
    Ok(DagModel {
        classes,
        nodes,
        feature_map,
        hp,
        policy,
    })
}

pub fn save<T: Real>(m: &DagModel<T>, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, to_bytes(m)).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub fn load<T: Real>(path: impl AsRef<Path>) -> Result<DagModel<T>> {
    let path = path.as_ref();
    let buf = fs::read(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    from_bytes(&buf)
}
