//! Acceptance gate: one PASS/FAIL line per criterion, nonzero exit on any
//! failure.

use std::path::{Path, PathBuf};
use std::time::Instant;

use fbtsvm::linalg::Matrix;
use fbtsvm::solver::{solve, SolverConfig, SolverContext, SolverState};
use fbtsvm::{
    batches, gen_blobs, gen_hyper, load_libsvm, persistence, train_binary, train_dag, BatchPlan,
    BinaryModel, DagModel, Dataset, FeatureMap, FourierMap, Hyperparams, LabeledPoint,
    ScreenPolicy,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

// ---------------------------------------------------------------------------
// Dense reference algebra, independent of the crate's Cholesky routes.

fn gauss_jordan_inverse(a: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let n = a.len();
    let mut m: Vec<Vec<f64>> = a
        .iter()
        .enumerate()
        .map(|(i, r)| {
            let mut row = r.clone();
            row.extend((0..n).map(|j| if i == j { 1.0 } else { 0.0 }));
            row
        })
        .collect();
    for col in 0..n {
        let piv = (col..n)
            .max_by(|&x, &y| m[x][col].abs().partial_cmp(&m[y][col].abs()).unwrap())
            .unwrap();
        m.swap(col, piv);
        let p = m[col][col];
        m[col].iter_mut().for_each(|v| *v /= p);
        for r in 0..n {
            if r != col {
                let f = m[r][col];
                if f != 0.0 {
                    let pivot_row = m[col].clone();
                    m[r].iter_mut()
                        .zip(&pivot_row)
                        .for_each(|(v, q)| *v -= f * q);
                }
            }
        }
    }
    m.into_iter().map(|r| r[n..].to_vec()).collect()
}

fn rows_of(m: &Matrix<f64>) -> Vec<Vec<f64>> {
    m.iter_rows().map(|r| r.to_vec()).collect()
}

/// `(HᵀH + cI)⁻¹`
fn reg_inverse(h: &[Vec<f64>], c: f64) -> Vec<Vec<f64>> {
    let m = h[0].len();
    let mut a = vec![vec![0.0; m]; m];
    for r in h {
        for i in 0..m {
            for j in 0..m {
                a[i][j] += r[i] * r[j];
            }
        }
    }
    (0..m).for_each(|i| a[i][i] += c);
    gauss_jordan_inverse(&a)
}

fn mat_vec(a: &[Vec<f64>], x: &[f64]) -> Vec<f64> {
    a.iter()
        .map(|r| r.iter().zip(x).map(|(p, q)| p * q).sum())
        .collect()
}

fn tr_vec(h: &[Vec<f64>], x: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; h[0].len()];
    for (r, &xi) in h.iter().zip(x) {
        out.iter_mut().zip(r).for_each(|(o, v)| *o += xi * v);
    }
    out
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// `Q = H_other (H_ownᵀH_own + cI)⁻¹ H_otherᵀ`
fn dense_q(h_own: &[Vec<f64>], h_other: &[Vec<f64>], c: f64) -> Vec<Vec<f64>> {
    let inv = reg_inverse(h_own, c);
    let w: Vec<Vec<f64>> = h_other.iter().map(|r| mat_vec(&inv, r)).collect();
    h_other
        .iter()
        .map(|r| {
            w.iter()
                .map(|q| r.iter().zip(q).map(|(a, b)| a * b).sum())
                .collect()
        })
        .collect()
}

fn objective(q: &[Vec<f64>], a: &[f64]) -> f64 {
    let qa = mat_vec(q, a);
    0.5 * a.iter().zip(&qa).map(|(x, y)| x * y).sum::<f64>() - a.iter().sum::<f64>()
}

/// Accelerated projected gradient on `½αᵀQα − eᵀα`, `0 ≤ α ≤ upper`.
fn fista(q: &[Vec<f64>], upper: &[f64]) -> f64 {
    let n = q.len();
    let lip = q
        .iter()
        .map(|r| r.iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0, f64::max);
    let mut x = vec![0.0; n];
    let mut y = x.clone();
    let mut t = 1.0f64;
    for _ in 0..60_000 {
        let g = mat_vec(q, &y);
        let next: Vec<f64> = (0..n)
            .map(|i| (y[i] - (g[i] - 1.0) / lip).clamp(0.0, upper[i]))
            .collect();
        let t_next = (1.0 + (1.0 + 4.0 * t * t).sqrt()) / 2.0;
        y = (0..n)
            .map(|i| next[i] + (t - 1.0) / t_next * (next[i] - x[i]))
            .collect();
        x = next;
        t = t_next;
    }
    objective(q, &x)
}

fn random_rows(rng: &mut ChaCha8Rng, rows: usize, n: usize) -> Matrix<f64> {
    let data: Vec<f64> = (0..rows)
        .flat_map(|_| {
            let mut r: Vec<f64> = (0..n).map(|_| rng.random_range(-2.0..2.0)).collect();
            r.push(1.0);
            r
        })
        .collect();
    Matrix::from_vec(rows, n + 1, data).unwrap()
}

// ---------------------------------------------------------------------------

fn criterion_1() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let cfg = SolverConfig {
        epsilon: 1e-5,
        max_sweeps: 200_000,
        ..SolverConfig::default()
    };
    let (mut worst_rel, mut worst_kkt) = (0.0f64, 0.0f64);
    for k in 0..50 {
        let n = rng.random_range(1..=8);
        let l_own = rng.random_range(1..=30);
        let l_other = rng.random_range(1..=30);
        let c_reg = rng.random_range(0.1..2.0);
        let c_box = rng.random_range(0.5..4.0);
        let upper: Vec<f64> = (0..l_other)
            .map(|_| c_box * (1.0 - rng.random::<f64>()))
            .collect();
        let h_own = random_rows(&mut rng, l_own, n);
        let h_other = random_rows(&mut rng, l_other, n);
        let ctx = SolverContext::precompute(h_own.clone(), h_other.clone(), c_reg)
            .map_err(|e| e.to_string())?;
        let mut st = SolverState::cold(&ctx, upper.clone()).map_err(|e| e.to_string())?;
        let cfg = SolverConfig { seed: k, ..cfg };
        solve(&ctx, &mut st, &cfg).map_err(|e| e.to_string())?;

        let q = dense_q(&rows_of(&h_own), &rows_of(&h_other), c_reg);
        let f_dcd = objective(&q, &st.alpha);
        let f_ref = fista(&q, &upper);
        worst_rel = worst_rel.max((f_dcd - f_ref).abs() / f_ref.abs().max(1e-12));
        let g = mat_vec(&q, &st.alpha);
        for i in 0..l_other {
            let gi = g[i] - 1.0;
            let pg = if st.alpha[i] <= 0.0 {
                gi.min(0.0)
            } else if st.alpha[i] >= upper[i] {
                gi.max(0.0)
            } else {
                gi
            };
            worst_kkt = worst_kkt.max(pg.abs());
        }
    }
    let secs = start.elapsed().as_secs_f64();
    let msg =
        format!("max rel objective gap {worst_rel:.2e}, max |PG| {worst_kkt:.2e}, {secs:.2}s");
    if worst_rel <= 1e-4 && worst_kkt <= 1e-5 && secs < 10.0 {
        Ok(msg)
    } else {
        Err(msg)
    }
}

/// Relative deviation of the stored stacks from a dense recomputation.
fn primal_deviation(m: &BinaryModel<f64>, hp: &Hyperparams<f64>) -> f64 {
    let h_pos = rows_of(&m.retained_pos.augmented(1.0));
    let h_neg = rows_of(&m.retained_neg.augmented(1.0));
    let up: Vec<f64> = mat_vec(&reg_inverse(&h_pos, hp.c1), &tr_vec(&h_neg, &m.alpha))
        .into_iter()
        .map(|v| -v)
        .collect();
    let um = mat_vec(&reg_inverse(&h_neg, hp.c2), &tr_vec(&h_pos, &m.nu));
    let rel = |stored: &[f64], fresh: &[f64]| {
        let d: Vec<f64> = stored.iter().zip(fresh).map(|(a, b)| a - b).collect();
        norm(&d) / (1.0 + norm(stored))
    };
    rel(&m.u_plus, &up).max(rel(&m.u_minus, &um))
}

fn split_binary(d: &Dataset<f64>) -> (Matrix<f64>, Matrix<f64>) {
    let mut pos = Matrix::with_cols(d.dim());
    let mut neg = Matrix::with_cols(d.dim());
    for p in d.points() {
        if p.label == 1 {
            pos.push_row(&p.features).unwrap();
        } else {
            neg.push_row(&p.features).unwrap();
        }
    }
    (pos, neg)
}

fn criterion_2() -> Outcome {
    let mut worst = 0.0f64;
    let mut checks = 0;
    let centers = [vec![0.0, 0.0, 0.0], vec![2.0, 1.5, -1.0]];
    for (policy, d) in [
        (ScreenPolicy::Extrema, None),
        (ScreenPolicy::Quartiles, Some(2)),
        (ScreenPolicy::Disabled, Some(1)),
        (ScreenPolicy::Median, None),
    ] {
        let mut hp = Hyperparams::two_dim(2.0, 0.5);
        hp.forgetting.d = d;
        let (p, n) = split_binary(&gen_blobs(&centers, 1.2, 40, 5).unwrap());
        let mut m = train_binary(&p, &n, &hp).map_err(|e| e.to_string())?;
        worst = worst.max(primal_deviation(&m, &hp));
        checks += 1;
        for k in 0..8 {
            let (p, n) = split_binary(&gen_blobs(&centers, 1.2, 15, 100 + k).unwrap());
            fbtsvm::incremental::update(&mut m, &p, &n, &hp, policy).map_err(|e| e.to_string())?;
            worst = worst.max(primal_deviation(&m, &hp));
            checks += 1;
        }
    }
    let msg = format!("{checks} solves/updates, max ‖u + Q′α‖/(1+‖u‖) = {worst:.2e}");
    if worst <= 1e-8 {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn rff_error(features: usize, pairs: &[(Vec<f64>, Vec<f64>)]) -> f64 {
    let gamma = 0.5;
    let map = FourierMap::sample(5, features, gamma, 77).unwrap();
    pairs
        .iter()
        .map(|(x, y)| {
            let zx = map.transform(x).unwrap();
            let zy = map.transform(y).unwrap();
            let approx: f64 = zx.iter().zip(&zy).map(|(a, b)| a * b).sum();
            let d2: f64 = x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum();
            (approx - (-gamma * d2).exp()).abs()
        })
        .sum::<f64>()
        / pairs.len() as f64
}

fn criterion_3() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut point = || (0..5).map(|_| rng.random::<f64>()).collect::<Vec<f64>>();
    let pairs: Vec<_> = (0..1000).map(|_| (point(), point())).collect();
    let errs: Vec<f64> = [128, 512, 2048]
        .iter()
        .map(|&n| rff_error(n, &pairs))
        .collect();
    let secs = start.elapsed().as_secs_f64();
    let monotone = errs[1] <= 1.1 * errs[0] && errs[2] <= 1.1 * errs[1];
    let msg = format!(
        "mean |error| N=128: {:.4}, N=512: {:.4}, N=2048: {:.4}, {secs:.2}s",
        errs[0], errs[1], errs[2]
    );
    if errs[2] <= 0.05 && monotone && secs < 5.0 {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn dna_files() -> Option<(PathBuf, PathBuf)> {
    let dir = std::env::var_os("FBTSVM_DNA_DIR")
        .map(PathBuf::from)
        .unwrap_or_else(|| Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/data/dna"));
    let train = ["dna.scale.tr", "dna.scale"]
        .iter()
        .map(|f| dir.join(f))
        .find(|p| p.exists())?;
    let test = dir.join("dna.scale.t");
    test.exists().then_some((train, test))
}

/// Pads sparse rows to `dim` attributes.
fn pad(d: Dataset<f64>, dim: usize) -> Dataset<f64> {
    let pts = d
        .into_points()
        .into_iter()
        .map(|mut p| {
            p.features.resize(dim, 0.0);
            p
        })
        .collect();
    Dataset::new(dim, pts).unwrap()
}

/// Initial batch of `initial` points, then the rest in batches of `batch`.
fn stream(d: &Dataset<f64>, initial: usize, batch: usize, seed: u64) -> Vec<Dataset<f64>> {
    let first = batches(
        d,
        BatchPlan {
            batch_size: initial,
            seed,
        },
    )
    .unwrap();
    let mut out = vec![first[0].clone()];
    let rest: Vec<LabeledPoint<f64>> = first[1..]
        .iter()
        .flat_map(|b| b.points().to_vec())
        .collect();
    for chunk in rest.chunks(batch) {
        out.push(Dataset::new(d.dim(), chunk.to_vec()).unwrap());
    }
    out
}

fn criterion_4() -> Outcome {
    let Some((train_path, test_path)) = dna_files() else {
        return Err("DNA data not found (set FBTSVM_DNA_DIR to a directory holding dna.scale.tr and dna.scale.t)".into());
    };
    let train: Dataset<f64> = load_libsvm(&train_path).map_err(|e| e.to_string())?;
    let test: Dataset<f64> = load_libsvm(&test_path).map_err(|e| e.to_string())?;
    let dim = train.dim().max(test.dim());
    let (train, test) = (pad(train, dim), pad(test, dim));
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(1)
        .build()
        .unwrap();
    pool.install(|| {
        let hp = Hyperparams::two_dim(4.0, 4.0);
        let map = FeatureMap::Fourier(FourierMap::sample(dim, 500, 0.003, 0).unwrap());
        let batch = (train.len() as f64 * 0.05).ceil() as usize;
        let parts = stream(&train, 50, batch, 0);
        let start = Instant::now();
        let mut m =
            train_dag(&parts[0], &hp, map, ScreenPolicy::Extrema).map_err(|e| e.to_string())?;
        for b in &parts[1..] {
            m.update(b).map_err(|e| e.to_string())?;
        }
        let secs = start.elapsed().as_secs_f64();
        let acc = m.evaluate(&test).map_err(|e| e.to_string())?.accuracy;
        let msg = format!(
            "{} train / {} test, accuracy {:.2}%, train {secs:.2}s single-threaded",
            train.len(),
            test.len(),
            100.0 * acc
        );
        if acc >= 0.91 && secs < 60.0 {
            Ok(msg)
        } else {
            Err(msg)
        }
    })
}

fn criterion_5() -> Outcome {
    let start = Instant::now();
    let (all, _) = gen_hyper::<f64>(13_000, 10, 0.1, 5).map_err(|e| e.to_string())?;
    let pts = all.into_points();
    let train = Dataset::new(10, pts[..10_000].to_vec()).unwrap();
    let test = Dataset::new(10, pts[10_000..].to_vec()).unwrap();
    let parts = stream(&train, 500, 500, 1);
    let mut m = train_dag(
        &parts[0],
        &Hyperparams::default(),
        FeatureMap::Linear { input_dim: 10 },
        ScreenPolicy::Extrema,
    )
    .map_err(|e| e.to_string())?;
    for b in &parts[1..] {
        m.update(b).map_err(|e| e.to_string())?;
    }
    let acc = m.evaluate(&test).map_err(|e| e.to_string())?.accuracy;
    let secs = start.elapsed().as_secs_f64();
    let msg = format!("accuracy {:.2}%, {secs:.2}s", 100.0 * acc);
    if acc >= 0.85 && secs < 30.0 {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn three_blobs(per: usize, seed: u64) -> Dataset<f64> {
    gen_blobs(
        &[vec![0.0, 0.0], vec![3.0, 0.5], vec![1.0, 3.0]],
        1.0,
        per,
        seed,
    )
    .unwrap()
}

fn criterion_6() -> Outcome {
    let train = three_blobs(400, 61);
    let test = three_blobs(200, 62);
    let parts = stream(&train, 60, 60, 6);
    let run = |d: Option<u32>| -> Result<(usize, f64), String> {
        let mut hp = Hyperparams::default();
        hp.forgetting.d = d;
        let mut m = train_dag(
            &parts[0],
            &hp,
            FeatureMap::Linear { input_dim: 2 },
            ScreenPolicy::Extrema,
        )
        .map_err(|e| e.to_string())?;
        for b in &parts[1..] {
            m.update(b).map_err(|e| e.to_string())?;
        }
        Ok((
            m.n_sv(),
            m.evaluate(&test).map_err(|e| e.to_string())?.accuracy,
        ))
    };
    let (s1, a1) = run(Some(1))?;
    let (s10, a10) = run(Some(10))?;
    let (sinf, ainf) = run(None)?;
    let msg = format!(
        "nSV d=1: {s1}, d=10: {s10}, d=∞: {sinf}; accuracy {:.2}% / {:.2}% / {:.2}%",
        100.0 * a1,
        100.0 * a10,
        100.0 * ainf
    );
    if s1 <= s10 && s10 <= sinf && ainf - a1 <= 0.06 {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn criterion_7() -> Outcome {
    let centers = [vec![0.0, 0.0], vec![3.0, 0.0], vec![0.0, 3.0]];
    // 334 per class, interleaved, so the first 1000 rows stay balanced.
    let train = gen_blobs::<f64>(&centers, 1.0, 334, 71).unwrap();
    let train = train.select(&(0..1000).collect::<Vec<_>>());
    let test = gen_blobs::<f64>(&centers, 1.0, 300, 72).unwrap();
    let hp = Hyperparams::default();
    let map = FeatureMap::Linear { input_dim: 2 };
    let single =
        train_dag(&train, &hp, map.clone(), ScreenPolicy::Disabled).map_err(|e| e.to_string())?;
    let parts = batches(
        &train,
        BatchPlan {
            batch_size: 200,
            seed: 7,
        },
    )
    .map_err(|e| e.to_string())?;
    let mut inc =
        train_dag(&parts[0], &hp, map, ScreenPolicy::Disabled).map_err(|e| e.to_string())?;
    for b in &parts[1..] {
        inc.update(b).map_err(|e| e.to_string())?;
    }
    let a = single.evaluate(&test).map_err(|e| e.to_string())?.accuracy;
    let b = inc.evaluate(&test).map_err(|e| e.to_string())?.accuracy;
    let msg = format!(
        "{} batches; single-shot {:.2}%, incremental {:.2}%",
        parts.len(),
        100.0 * a,
        100.0 * b
    );
    if (a - b).abs() <= 0.02 {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn criterion_8() -> Outcome {
    let mut notes = Vec::new();
    for u in [2usize, 3, 4, 26] {
        let centers: Vec<Vec<f64>> = (0..u)
            .map(|k| {
                let t = k as f64 / u as f64 * std::f64::consts::TAU;
                vec![20.0 * t.cos(), 20.0 * t.sin(), (k % 3) as f64]
            })
            .collect();
        let d = gen_blobs::<f64>(&centers, 0.5, 12, u as u64).unwrap();
        let m = train_dag(
            &d,
            &Hyperparams::default(),
            FeatureMap::Linear { input_dim: 3 },
            ScreenPolicy::Extrema,
        )
        .map_err(|e| e.to_string())?;
        if m.nodes.len() != u * (u - 1) / 2 {
            return Err(format!("u={u}: {} nodes", m.nodes.len()));
        }
        let probes = gen_blobs::<f64>(&[vec![0.0, 0.0, 0.0]], 15.0, 200, 9).unwrap();
        for p in d.points().iter().chain(probes.points()) {
            let t = m.predict_traced(&p.features).map_err(|e| e.to_string())?;
            if t.evaluations() != u - 1 {
                return Err(format!("u={u}: {} evaluations", t.evaluations()));
            }
        }
        notes.push(format!("u={u}: {} nodes", m.nodes.len()));
    }
    Ok(format!(
        "{}; every prediction used u−1 evaluations",
        notes.join(", ")
    ))
}

fn criterion_9() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let path = dir.path().join("model.fbtw");
    let train = three_blobs(100, 91);
    let mut hp = Hyperparams::default();
    hp.forgetting.d = Some(2);
    let map = FeatureMap::Fourier(FourierMap::sample(2, 64, 0.5, 9).unwrap());
    let mut live = train_dag(&train, &hp, map, ScreenPolicy::Extrema).map_err(|e| e.to_string())?;

    let loaded: DagModel<f64> = {
        persistence::save(&live, &path).map_err(|e| e.to_string())?;
        persistence::load(&path).map_err(|e| e.to_string())?
    };
    let probes = gen_blobs::<f64>(&[vec![1.0, 1.0]], 3.0, 1000, 92).unwrap();
    for p in probes.points() {
        if loaded.predict(&p.features).unwrap() != live.predict(&p.features).unwrap() {
            return Err("prediction differs after load".into());
        }
    }
    for k in 0..4 {
        let batch = three_blobs(20, 200 + k);
        persistence::save(&live, &path).map_err(|e| e.to_string())?;
        let mut resumed: DagModel<f64> = persistence::load(&path).map_err(|e| e.to_string())?;
        live.update(&batch).map_err(|e| e.to_string())?;
        resumed.update(&batch).map_err(|e| e.to_string())?;
        let same = live.nodes.iter().zip(&resumed.nodes).all(|(a, b)| {
            let bits = |v: &[f64]| v.iter().map(|x| x.to_bits()).collect::<Vec<_>>();
            bits(&a.u_plus) == bits(&b.u_plus) && bits(&a.u_minus) == bits(&b.u_minus)
        });
        if !same {
            return Err(format!("u vectors differ after resumed update {k}"));
        }
    }
    Ok("1000 probes identical after load; 4 resumed updates bitwise-equal".into())
}

fn main() {
    let criteria: [Criterion; 9] = [
        ("solver matches dense QP oracle", criterion_1),
        ("primal stack consistency", criterion_2),
        ("random Fourier feature fidelity", criterion_3),
        ("DNA stream accuracy and time", criterion_4),
        ("HYPER stream accuracy", criterion_5),
        ("forgetting monotonicity", criterion_6),
        ("incremental matches batch", criterion_7),
        ("DAG structure", criterion_8),
        ("persistence round trip", criterion_9),
    ];
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        match f() {
            Ok(msg) => println!("PASS criterion {} ({name}): {msg}", i + 1),
            Err(msg) => {
                failed += 1;
                println!("FAIL criterion {} ({name}): {msg}", i + 1);
            }
        }
    }
    println!(
        "{} of {} criteria passed",
        criteria.len() - failed,
        criteria.len()
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
