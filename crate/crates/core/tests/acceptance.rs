//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails. Oracles here are computed independently
//! of the library code they check.

use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::path::Path;
use std::time::Instant;

use wetres::bacteria::{agent_stream, receptor_activity, step_methylation, step_motion, Bacterium, ChemoParams};
use wetres::config::ExperimentConfig;
use wetres::experiment;
use wetres::fields::{ChemicalField, GridSpec, SpeciesParams};
use wetres::geom::Vec3;
use wetres::readout::metrics::{nrmse, pearson};
use wetres::readout::ridge::fit_ridge;
use wetres::readout::{memory_curve, sweep, Evaluation, ReadoutConfig};
use wetres::reservoir::{discard_washin, run_simulation, StateTrajectory, TrajectoryMeta};
use wetres::signals::{generate, input_sequence, History, MgParams};
use wetres::transducer::{step_internal, AcParams, AcRole, AcState};

struct Outcome {
    pass: bool,
    lines: Vec<String>,
}

impl Outcome {
    fn new() -> Self {
        Self { pass: true, lines: Vec::new() }
    }

    fn check(&mut self, ok: bool, detail: String) {
        self.pass &= ok;
        self.lines.push(format!("{} {detail}", if ok { "ok  " } else { "FAIL" }));
    }
}

fn run(name: &str, budget_s: Option<f64>, f: impl FnOnce() -> Outcome) -> bool {
    let start = Instant::now();
    let mut out = f();
    let secs = start.elapsed().as_secs_f64();
    if let Some(b) = budget_s {
        out.check(secs < b, format!("runtime {secs:.1} s < {b} s"));
    }
    println!("[{}] {name} ({secs:.1} s)", if out.pass { "PASS" } else { "FAIL" });
    for l in &out.lines {
        println!("       {l}");
    }
    out.pass
}

// ---------------------------------------------------------------- fields

fn species(d: f64, decay: f64, flow: f64) -> SpeciesParams {
    SpeciesParams { diffusion: d, decay, flow_velocity: flow, ..SpeciesParams::attractant() }
}

fn field_oracles() -> Outcome {
    let mut out = Outcome::new();
    let grid = GridSpec::default();

    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let init: Vec<f64> = (0..grid.n_voxels()).map(|_| rng.gen::<f64>() * 10.0).collect();
    let mut f = ChemicalField::new(grid, species(100.0, 0.0, 0.0), 0.0).unwrap();
    f.set_concentrations(&init).unwrap();
    let m0 = f.total_mass();
    for _ in 0..1000 {
        f.step();
    }
    let drift = ((f.total_mass() - m0) / m0).abs();
    out.check(drift <= 1e-9, format!("diffusion-only mass drift over 1000 steps {drift:.2e} <= 1e-9"));

    let alpha = 0.02;
    let mut f = ChemicalField::new(grid, species(0.0, alpha, 0.0), 3.0).unwrap();
    let n = 5000;
    for _ in 0..n {
        f.step();
    }
    let exact = 3.0 * (-alpha * grid.dt * n as f64).exp();
    let err = f.concentrations().iter().map(|c| ((c - exact) / exact).abs()).fold(0.0, f64::max);
    out.check(err <= 1e-12, format!("decay-only vs c0·exp(-αt) at t = {} s: rel err {err:.2e} <= 1e-12", grid.dt * n as f64));

    let mut f = ChemicalField::new(grid, SpeciesParams::attractant(), 0.0).unwrap();
    f.deposit(grid.center(), 1e6).unwrap();
    let peak = f.max_concentration();
    let mut steps = 0usize;
    while f.max_concentration() >= 1e-6 * peak && steps < 200_000 {
        f.step();
        steps += 1;
    }
    let ratio = f.max_concentration() / peak;
    out.check(ratio < 1e-6, format!("pulse washout under default decay + flow: max/peak {ratio:.2e} < 1e-6 after {:.0} s", steps as f64 * grid.dt));
    out
}

// ---------------------------------------------------------------- bacteria

fn adaptation_oracle() -> Outcome {
    let mut out = Outcome::new();
    let p = ChemoParams::default();
    let target = p.k_r / (p.k_r + p.k_b);
    let dt = 0.01;
    for c in [0.0, 100.0, 1000.0] {
        let mut b = Bacterium::new(0, Vec3::default(), Vec3::new(1.0, 0.0, 0.0), p.m0, 0.0, 1.0, agent_stream(0, 0));
        b.a = receptor_activity(c, 0.0, b.m, &p);
        let start = b.a;
        for _ in 0..300_000 {
            step_methylation(&mut b, c, 0.0, &p, dt);
        }
        let err = (b.a - target).abs();
        out.check(err < 1e-3, format!("c_a = {c}: activity {start:.4} -> {:.6}, |a - k_R/(k_R+k_B)| = {err:.1e} < 1e-3", b.a));
    }
    out
}

fn chemotaxis_trend() -> Outcome {
    let mut out = Outcome::new();
    let grid = GridSpec::default();
    let p = ChemoParams::default();
    let static_field = SpeciesParams { diffusion: 0.0, decay: 0.0, flow_velocity: 0.0, ..SpeciesParams::attractant() };
    let mut field = ChemicalField::new(grid, static_field, 0.0).unwrap();
    let slope = 10.0; // molecules/µm³ per µm along +x
    let conc: Vec<f64> = (0..grid.n_voxels())
        .map(|i| {
            let (ix, _, _) = grid.unflat(i);
            slope * (ix as f64 + 0.5) * grid.voxel_edge
        })
        .collect();
    field.set_concentrations(&conc).unwrap();

    let extent = grid.extent();
    let start = grid.center();
    let n_agents = 500;
    let finals: Vec<f64> = (0..n_agents)
        .map(|id| {
            let mut rng = agent_stream(7, id as u64);
            let heading = Vec3::random_unit(&mut rng);
            let c0 = field.sample(start).unwrap();
            let m = p.m0 + (c0 / p.k_a).ln_1p() / p.alpha_m;
            let mut b = Bacterium::new(id as u64, start, heading, m, 0.0, 1.0, rng);
            b.a = receptor_activity(c0, 0.0, b.m, &p);
            for _ in 0..10_000 {
                let c = field.sample(b.position).unwrap();
                step_methylation(&mut b, c, 0.0, &p, grid.dt);
                step_motion(&mut b, &p, grid.dt, extent);
            }
            b.position.x - start.x
        })
        .collect();
    let n = finals.len() as f64;
    let mean = finals.iter().sum::<f64>() / n;
    let sd = (finals.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
    let z = mean / (sd / n.sqrt());
    out.check(z >= 3.0, format!("500 agents, 1e4 steps: mean up-gradient displacement {mean:.2} µm, z = {z:.1} >= 3"));
    out
}

// ---------------------------------------------------------------- transducer

fn transducer_oracle() -> Outcome {
    let mut out = Outcome::new();
    let p = AcParams::default();
    let dt = 0.01;
    let n_sub = 1000;
    let h = dt / n_sub as f64;
    let mut worst: f64 = 0.0;
    for (x0, s0, u) in [(0.0, 0.0, 1.0), (0.3, 1.7, 0.8), (2.0, 0.1, 0.0), (1.0, 5.0, 0.25)] {
        let st = AcState { x_ac: x0, s_ac: s0, position: Vec3::default(), role: AcRole::AttractantSecretor };
        let next = step_internal(&st, u, &p, dt);
        let (mut x, mut s) = (x0, s0);
        for _ in 0..n_sub {
            let dx = p.k_u * u - p.gamma_x * x;
            let ds = p.k_x * x - p.gamma_s * s;
            x += h * dx;
            s += h * ds;
        }
        worst = worst.max((next.x_ac - x).abs()).max((next.s_ac - s).abs());
    }
    out.check(worst < 1e-6, format!("one step vs 1000 Euler substeps, 4 states/inputs: max diff {worst:.2e} < 1e-6"));

    let u = 0.6;
    let mut st = AcState::at_rest(Vec3::default(), AcRole::RepellentSecretor);
    for _ in 0..10_000 {
        st = step_internal(&st, u, &p, 0.1);
    }
    let x_star = p.k_u * u / p.gamma_x;
    let s_star = p.k_x * x_star / p.gamma_s;
    let ex = (st.x_ac - x_star).abs();
    let es = (st.s_ac - s_star).abs();
    out.check(ex < 1e-8 && es < 1e-8, format!("fixed points x* = k_u·u/γ_x = {x_star}, s* = k_x·x*/γ_s = {s_star}: errors {ex:.1e}, {es:.1e} < 1e-8"));
    out
}

// ---------------------------------------------------------------- signals

fn mackey_glass() -> Outcome {
    let mut out = Outcome::new();
    let fixed = MgParams { history: History::Constant(1.0), ..MgParams::default() };
    let xs = generate(&fixed, 20_000).unwrap();
    let dev = xs.iter().map(|x| (x - 1.0).abs()).fold(0.0, f64::max);
    out.check(dev <= 1e-10, format!("constant-1 history over t = 2000: max |x - 1| = {dev:.1e} <= 1e-10"));

    let t_end = 100.0;
    let at = |dt: f64| {
        let p = MgParams { dt_int: dt, ..MgParams::default() };
        let n = (t_end / dt).round() as usize;
        generate(&p, n).unwrap()[n]
    };
    let (a, b, c) = (at(0.1), at(0.05), at(0.025));
    let order = ((a - b) / (b - c)).abs().log2();
    out.check(order >= 3.5, format!("RK4 Richardson order from dt = 0.1/0.05/0.025 at t = {t_end}: {order:.2} >= 3.5"));
    out
}

// ---------------------------------------------------------------- readout

fn gaussian_solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Vec<f64> {
    let n = b.len();
    for col in 0..n {
        let piv = (col..n).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs())).unwrap();
        a.swap(col, piv);
        b.swap(col, piv);
        for row in col + 1..n {
            let f = a[row][col] / a[col][col];
            for k in col..n {
                a[row][k] -= f * a[col][k];
            }
            b[row] -= f * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        let s: f64 = (i + 1..n).map(|k| a[i][k] * x[k]).sum();
        x[i] = (b[i] - s) / a[i][i];
    }
    x
}

fn readout_oracles() -> Outcome {
    let mut out = Outcome::new();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let (n, p) = (80, 6);
    let x = DMatrix::from_fn(n, p, |_, _| rng.gen::<f64>() * 2.0 - 1.0);
    let y: Vec<f64> = (0..n).map(|_| rng.gen::<f64>()).collect();
    let mut worst: f64 = 0.0;
    for lambda in [0.0, 1e-4, 0.5, 20.0] {
        let fit = fit_ridge(&x, &y, lambda).unwrap();
        // normal equations with an unpenalised trailing bias column
        let phi = |i: usize, j: usize| if j < p { x[(i, j)] } else { 1.0 };
        let a: Vec<Vec<f64>> = (0..=p)
            .map(|r| (0..=p).map(|c| (0..n).map(|i| phi(i, r) * phi(i, c)).sum::<f64>() + if r == c && r < p { lambda } else { 0.0 }).collect())
            .collect();
        let rhs: Vec<f64> = (0..=p).map(|r| (0..n).map(|i| phi(i, r) * y[i]).sum()).collect();
        let w = gaussian_solve(a, rhs);
        let got = fit.with_bias();
        worst = worst.max((0..=p).map(|i| (got[i] - w[i]).abs()).fold(0.0, f64::max));
    }
    out.check(worst < 1e-8, format!("ridge vs dense normal-equation solve (λ = 0, 1e-4, 0.5, 20): max diff {worst:.1e} < 1e-8"));

    let x2 = DMatrix::from_fn(50, 2, |_, _| rng.gen::<f64>() * 2.0 - 1.0);
    let y2: Vec<f64> = x2.row_iter().map(|r| 2.0 * r[0] - r[1]).collect();
    let fit = fit_ridge(&x2, &y2, 1e-12).unwrap();
    let err = (fit.coef[0] - 2.0).abs().max((fit.coef[1] + 1.0).abs());
    out.check(err < 1e-6, format!("planted weights [2, -1] recovered as [{:.8}, {:.8}], err {err:.1e} < 1e-6", fit.coef[0], fit.coef[1]));

    let target: Vec<f64> = (0..97).map(|_| rng.gen::<f64>() * 5.0).collect();
    let mean = target.iter().sum::<f64>() / target.len() as f64;
    let score = nrmse(&vec![mean; target.len()], &target).unwrap();
    out.check(score == 1.0, format!("NRMSE of the mean predictor = {score} (exactly 1)"));

    let (a, b) = ([1.0, 2.0, 3.0], [1.0, 2.0, 4.0]);
    let hand = {
        let (ma, mb) = (2.0, 7.0 / 3.0);
        let sab: f64 = a.iter().zip(&b).map(|(x, y)| (x - ma) * (y - mb)).sum();
        let saa: f64 = a.iter().map(|x| (x - ma) * (x - ma)).sum();
        let sbb: f64 = b.iter().map(|y| (y - mb) * (y - mb)).sum();
        sab / (saa * sbb).sqrt()
    };
    let r = pearson(&a, &b).unwrap();
    out.check((r - 0.9820).abs() <= 1e-4 && (r - hand).abs() < 1e-12, format!("Pearson([1,2,3], [1,2,4]) = {r:.6} (hand {hand:.6}), 0.9820 ± 1e-4"));
    out
}

fn trajectory(states: Vec<Vec<f64>>, inputs: Vec<f64>) -> StateTrajectory {
    let width = states[0].len();
    let meta = TrajectoryMeta {
        config_digest: "synthetic".into(),
        seed: 0,
        n_voxels: width / 3,
        n_windows: states.len(),
        first_window: 0,
        extinct_at: None,
    };
    StateTrajectory::new(states, inputs, meta).unwrap()
}

/// `r[n] = [u[n], u[n-1], ..., u[n-taps]]`, padded to a multiple of three.
fn delay_line(taps: usize, len: usize, seed: u64) -> StateTrajectory {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let u: Vec<f64> = (0..len + taps).map(|_| rng.gen::<f64>()).collect();
    let width = (taps + 1).div_ceil(3) * 3;
    let states = (taps..len + taps)
        .map(|n| {
            let mut r: Vec<f64> = (0..=taps).map(|l| u[n - l]).collect();
            r.resize(width, 0.0);
            r
        })
        .collect();
    trajectory(states, u[taps..].to_vec())
}

fn memory_oracle() -> Outcome {
    let mut out = Outcome::new();
    let cfg = ReadoutConfig::default();
    for taps in [5, 10, 20] {
        let traj = delay_line(taps, 600, 100 + taps as u64);
        let mc = memory_curve(&traj, cfg.d_max, &cfg).unwrap().mc;
        out.check((mc - taps as f64).abs() <= 0.5, format!("{taps}-tap delay line: MC = {mc:.3}, within {taps} ± 0.5"));
    }
    let traj = delay_line(10, 600, 7);
    let mut states = traj.states.clone();
    states.shuffle(&mut ChaCha8Rng::seed_from_u64(3));
    let shuffled = trajectory(states, traj.inputs.clone());
    let mc = memory_curve(&shuffled, cfg.d_max, &cfg).unwrap().mc;
    out.check(mc < 1.0, format!("time-shuffled states: MC = {mc:.3} < 1.0"));
    out
}

// ---------------------------------------------------------------- end to end

fn scaled_config() -> ExperimentConfig {
    let mut cfg = ExperimentConfig::default();
    cfg.simulation.n_windows = 300;
    cfg.simulation.n_washin = 30;
    cfg.seed = 0x5EED;
    cfg
}

fn find<'a>(evals: &'a [Evaluation], h: usize, k: usize) -> &'a Evaluation {
    evals.iter().find(|e| e.h == h && e.k == k).expect("evaluated pair")
}

fn end_to_end() -> Outcome {
    let mut out = Outcome::new();
    let cfg = scaled_config();
    let u = input_sequence(&cfg.signal, cfg.simulation.n_windows).unwrap();
    let t0 = Instant::now();
    let full = run_simulation(&cfg.simulation, &u, cfg.seed).unwrap();
    let traj = discard_washin(&full, cfg.simulation.n_washin).unwrap();
    let pop = traj.population();
    out.check(
        !traj.is_extinct(),
        format!(
            "10x10x10 grid, 300 windows, 30 wash-in: {} windows kept, population {} -> {}, simulated in {:.0} s",
            traj.len(),
            pop[0],
            pop[pop.len() - 1],
            t0.elapsed().as_secs_f64()
        ),
    );

    let readout = &cfg.readout;
    let curve = memory_curve(&traj, readout.d_max, readout).unwrap();
    let mc = curve.mc;
    let h_star = (0.7 * mc).round() as usize;

    let ks = [0usize, 1, 3, 5, 10];
    let mut hs: Vec<usize> = vec![1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 12, 15];
    if h_star >= 1 && !hs.contains(&h_star) {
        hs.push(h_star);
        hs.sort_unstable();
    }
    let evals = sweep(&traj, &hs, &ks, readout).unwrap();
    for k in ks {
        let row: Vec<String> = hs.iter().map(|&h| format!("{:.3}", find(&evals, h, k).median_nrmse)).collect();
        out.lines.push(format!("     median NRMSE k={k:<2} H={hs:?}: {}", row.join(" ")));
    }
    for k in ks {
        let row: Vec<String> = hs.iter().map(|&h| format!("{:.3}", find(&evals, h, k).median_correlation)).collect();
        out.lines.push(format!("     median corr  k={k:<2} H={hs:?}: {}", row.join(" ")));
    }

    // (a)
    let a_ok = ks.iter().all(|&k| find(&evals, 1, k).median_nrmse < find(&evals, 15, k).median_nrmse);
    let a_detail: Vec<String> =
        ks.iter().map(|&k| format!("k={k}: {:.3} < {:.3}", find(&evals, 1, k).median_nrmse, find(&evals, 15, k).median_nrmse)).collect();
    out.check(a_ok, format!("(a) median NRMSE at H=1 below H=15 for every k [{}]", a_detail.join(", ")));

    // (b)
    let mut b_ok = true;
    let mut b_detail = Vec::new();
    for &h in hs.iter().filter(|&&h| h >= 10) {
        let base = find(&evals, h, 0).median_nrmse;
        let (best_k, best) = ks[1..]
            .iter()
            .map(|&k| (k, find(&evals, h, k).median_nrmse))
            .min_by(|a, b| a.1.total_cmp(&b.1))
            .unwrap();
        b_ok &= best < base;
        b_detail.push(format!("H={h}: k={best_k} {best:.3} vs k=0 {base:.3}"));
    }
    out.check(b_ok, format!("(b) for H >= 10 the best k > 0 beats k = 0 [{}]", b_detail.join(", ")));

    // (c)
    let low: Vec<usize> = hs.iter().copied().filter(|&h| h <= 10).collect();
    let mut violations = Vec::new();
    let mut min_corr: f64 = f64::INFINITY;
    for &k in &ks {
        let corr: Vec<f64> = low.iter().map(|&h| find(&evals, h, k).median_correlation).collect();
        min_corr = min_corr.min(corr.iter().copied().fold(f64::INFINITY, f64::min));
        for (i, w) in corr.windows(2).enumerate() {
            if w[1] > w[0] + 0.05 {
                violations.push(format!("k={k} H={}->{}: {:+.3}", low[i], low[i + 1], w[1] - w[0]));
            }
        }
    }
    let c_ok = min_corr > 0.0 && violations.is_empty();
    out.check(
        c_ok,
        format!(
            "(c) H <= 10, every k: min median correlation {min_corr:.3} > 0; rises above +0.05 between successive H: [{}]",
            violations.join(", ")
        ),
    );

    // (d)
    let c1 = find(&evals, 1, 0).median_correlation;
    let d_ok = mc > 5.0 && h_star >= 1 && {
        let ch = find(&evals, h_star, 0).median_correlation;
        c1 - ch >= 0.2
    };
    let ch = if h_star >= 1 { find(&evals, h_star, 0).median_correlation } else { f64::NAN };
    out.check(
        d_ok,
        format!("(d) MC = {mc:.2} > 5; k=0 correlation at H = round(0.7·MC) = {h_star} is {ch:.3}, at H=1 {c1:.3}, drop {:.3} >= 0.2", c1 - ch),
    );
    out
}

// ---------------------------------------------------------------- determinism

fn outputs(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<(String, Vec<u8>)> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| !p.file_name().unwrap().to_string_lossy().starts_with("manifest_"))
        .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), std::fs::read(&p).unwrap()))
        .collect();
    files.sort();
    files
}

fn determinism() -> Outcome {
    let mut out = Outcome::new();
    let mut cfg = ExperimentConfig::default();
    cfg.simulation.n_windows = 120;
    cfg.simulation.n_washin = 20;
    cfg.h_list = vec![1, 2, 5];
    cfg.k_list = vec![0, 2];
    cfg.readout.d_max = 10;
    let tmp = tempfile::tempdir().unwrap();
    let run_in = |name: &str, workers: usize| {
        let mut c = cfg.clone();
        c.simulation.workers = workers;
        let dir = tmp.path().join(name);
        experiment::sweep(&c, &dir).unwrap();
        outputs(&dir)
    };
    let a = run_in("a", 1);
    let b = run_in("b", 1);
    let c = run_in("c", 4);
    let names: Vec<&str> = a.iter().map(|(n, _)| n.as_str()).collect();
    out.check(a == b, format!("two 1-worker runs give byte-identical outputs ({} files: {})", a.len(), names.join(", ")));
    out.check(a == c, "1-worker and 4-worker runs give byte-identical outputs".into());
    out
}

fn main() {
    println!("acceptance suite");
    let results = [
        run("field oracles", Some(10.0), field_oracles),
        run("adaptation oracle", Some(5.0), adaptation_oracle),
        run("chemotaxis trend", Some(60.0), chemotaxis_trend),
        run("transducer oracle", None, transducer_oracle),
        run("Mackey-Glass", None, mackey_glass),
        run("readout oracles", None, readout_oracles),
        run("memory-capacity oracle", None, memory_oracle),
        run("end-to-end trend reproduction", Some(900.0), end_to_end),
        run("determinism", None, determinism),
    ];
    let passed = results.iter().filter(|&&p| p).count();
    println!("{passed}/{} criteria passed", results.len());
    if passed != results.len() {
        std::process::exit(1);
    }
}
