//! Acceptance gates. Each test pins one advertised behavior at its stated
//! tolerance and, where a budget applies, its wall-clock limit; a failure
//! here means a released number moved.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fs;
use std::path::Path;
use std::process::Command;
use std::time::Instant;

use ndarray::Array2;
use num_complex::Complex64;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use cher::dephasing::{
    chi_from_map, map_from_factors, reconstruct_from_chi, DephasingFactors, TimeUnit,
};
use cher::lie::{root_system, GeneratorSet};
use cher::nonclassicality::{
    nonclassicality_lp_with_cap, nonclassicality_negativity, nonclassicality_of_dynamics,
    DEFAULT_LP_CAP,
};
use cher::oracle::{discretize_bath, reduced_coherences, Mode, ModeConfig, OracleMethod};
use cher::retrieval::{
    forward_transform, invert_1d, invert_pair_correlated, Axis, Frame, InversionConfig,
    PairInversionConfig, QuasiDistribution,
};
use cher::spin_boson::{
    compute_theta_phi, qubit_pair_factors, relative_phase_factor, BathParams, SpectralDensity,
};
use cher::st0::{
    fid_inversion_config, fid_time_grid, identify_axis, noise_study, recover_distribution,
    simulate_return_probs, NoiseConfig, ST0Params,
};

fn within(start: Instant, limit_s: f64) {
    let took = start.elapsed().as_secs_f64();
    assert!(took < limit_s, "took {took:.1} s, budget {limit_s} s");
}

fn uniform_times(t_end: f64, samples: usize) -> Vec<f64> {
    let dt = t_end / (samples - 1) as f64;
    (0..samples).map(|k| k as f64 * dt).collect()
}

/// Frequency profile behind the exponential-cutoff factor: a third-power
/// gamma density shifted to start at -4 (in cutoff units).
fn gamma_profile(x: f64) -> f64 {
    let u = x + 4.0;
    if u < 0.0 {
        0.0
    } else {
        u.powi(3) * (-u).exp() / 6.0
    }
}

fn largest_profile_gap(q: &QuasiDistribution, profile: impl Fn(f64) -> f64) -> f64 {
    assert_eq!(q.axes().len(), 1, "profile comparison needs one axis");
    let ax = &q.axes()[0];
    q.density()
        .iter()
        .enumerate()
        .map(|(i, &d)| (d - profile(ax.min + i as f64 * ax.step)).abs())
        .fold(0.0, f64::max)
}

fn cartan_grid(axes: Vec<Axis>, density: Vec<f64>) -> QuasiDistribution {
    let d = axes.len();
    QuasiDistribution::new(Frame::Cartan, axes, Array2::eye(d), density, Vec::new()).unwrap()
}

/// Random signed density brought to exact unit mass by a constant shift.
fn random_signed(rng: &mut ChaCha8Rng, lens: &[usize]) -> QuasiDistribution {
    const STEPS: [f64; 2] = [0.5, 0.25];
    let axes: Vec<Axis> = lens
        .iter()
        .enumerate()
        .map(|(j, &len)| Axis {
            label: format!("x{}", j + 1),
            min: -4.0,
            step: STEPS[j],
            len,
        })
        .collect();
    let cells: usize = lens.iter().product();
    let vol: f64 = axes.iter().map(|a| a.step).product();
    let mut density: Vec<f64> = (0..cells).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let mass: f64 = density.iter().sum::<f64>() * vol;
    let shift = (1.0 - mass) / (cells as f64 * vol);
    for v in &mut density {
        *v += shift;
    }
    cartan_grid(axes, density)
}

struct RootRow {
    positive: bool,
    simple: bool,
    alpha: Vec<f64>,
}

fn root_table(dir: &Path, n: usize) -> (f64, BTreeMap<usize, RootRow>) {
    let out = Command::new(env!("CARGO_BIN_EXE_cher"))
        .arg("--out-dir")
        .arg(dir)
        .args(["roots", "--n", &n.to_string()])
        .output()
        .unwrap();
    assert!(out.status.success(), "roots --n {n} failed");
    let text = fs::read_to_string(dir.join(format!("roots_n{n}.csv"))).unwrap();
    let mut jacobian = None;
    let mut rows = BTreeMap::new();
    for line in text.lines() {
        if let Some(rest) = line.strip_prefix("# jacobian ") {
            jacobian = Some(rest.parse::<f64>().unwrap());
            continue;
        }
        if line.starts_with('#') || line.starts_with("index,") {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        rows.insert(
            fields[0].parse::<usize>().unwrap(),
            RootRow {
                positive: fields[1].parse().unwrap(),
                simple: fields[2].parse().unwrap(),
                alpha: fields[3..].iter().map(|v| v.parse().unwrap()).collect(),
            },
        );
    }
    (jacobian.expect("jacobian header"), rows)
}

fn check_roots(rows: &BTreeMap<usize, RootRow>, expected: &[(usize, bool, Vec<f64>)]) {
    for (index, simple, alpha) in expected {
        let row = rows
            .get(index)
            .unwrap_or_else(|| panic!("no row for root {index}"));
        assert!(row.positive, "root {index} should be flagged positive");
        assert_eq!(row.simple, *simple, "root {index} simple flag");
        for (a, b) in row.alpha.iter().zip(alpha) {
            assert!(
                (a - b).abs() <= 1e-10,
                "root {index}: {:?} vs {alpha:?}",
                row.alpha
            );
        }
        // the mirror root shows up negated, non-positive, non-simple
        let twin = rows
            .values()
            .find(|r| {
                !r.positive
                    && r.alpha
                        .iter()
                        .zip(alpha)
                        .all(|(a, b)| (a + b).abs() <= 1e-10)
            })
            .unwrap_or_else(|| panic!("no mirror for root {index}"));
        assert!(!twin.simple);
    }
}

#[test]
fn criterion_01_root_catalog_through_the_binary() {
    let start = Instant::now();
    let dir = std::env::temp_dir().join(format!("cher-acc-roots-{}", std::process::id()));
    fs::create_dir_all(&dir).unwrap();
    let s3 = 3.0f64.sqrt();

    let (jac3, rows3) = root_table(&dir, 3);
    assert!((jac3 - 2.0 / s3).abs() <= 1e-10, "three-level jacobian {jac3}");
    assert_eq!(rows3.len(), 6);
    check_roots(
        &rows3,
        &[
            (1, true, vec![1.0, 0.0]),
            (4, false, vec![0.5, s3 / 2.0]),
            (6, true, vec![-0.5, s3 / 2.0]),
        ],
    );

    let s6 = 6.0f64.sqrt();
    let (jac4, rows4) = root_table(&dir, 4);
    assert!(
        (jac4 - 2.0f64.sqrt()).abs() <= 1e-10,
        "four-level jacobian {jac4}"
    );
    assert_eq!(rows4.len(), 12);
    check_roots(
        &rows4,
        &[
            (1, true, vec![1.0, 0.0, 0.0]),
            (4, false, vec![0.5, s3 / 2.0, 0.0]),
            (6, true, vec![-0.5, s3 / 2.0, 0.0]),
            (9, false, vec![0.5, 1.0 / (2.0 * s3), s6 / 3.0]),
            (11, false, vec![-0.5, 1.0 / (2.0 * s3), s6 / 3.0]),
            (13, true, vec![0.0, -1.0 / s3, s6 / 3.0]),
        ],
    );

    fs::remove_dir_all(&dir).ok();
    within(start, 1.0);
}

#[test]
fn criterion_02_ohmic_phase_and_decay_quadrature() {
    let start = Instant::now();
    let sd = SpectralDensity::ohmic(1.0).unwrap();
    let times = uniform_times(40.0, 161);
    let model = compute_theta_phi(&sd, &BathParams::default(), &times).unwrap();
    for (k, &t) in times.iter().enumerate() {
        let theta = 4.0 * (t - t.atan());
        let phi = 2.0 * (1.0 + t * t).ln();
        assert!(
            (model.theta[k] - theta).abs() <= 1e-8,
            "theta({t}): {} vs {theta}",
            model.theta[k]
        );
        assert!(
            (model.phi[k] - phi).abs() <= 1e-8,
            "Phi({t}): {} vs {phi}",
            model.phi[k]
        );
    }

    let f = qubit_pair_factors(&sd, &BathParams::default(), &times).unwrap();
    let quartic = f.factor(9).unwrap();
    for (k, &t) in times.iter().enumerate() {
        let want = (1.0 + t * t).powi(-8);
        assert!(
            (quartic[k] - Complex64::new(want, 0.0)).norm() <= 1e-10,
            "fourth-power factor at t = {t}: {} vs {want}",
            quartic[k]
        );
    }
    within(start, 10.0);
}

#[test]
fn criterion_03_single_direction_retrieval_refines() {
    let start = Instant::now();
    let sd = SpectralDensity::ohmic(1.0).unwrap();
    let bath = BathParams::default();

    let gap_for = |samples: usize| {
        let times = uniform_times(40.0, samples);
        let f = qubit_pair_factors(&sd, &bath, &times).unwrap();
        let (q, _) = invert_1d(
            &times,
            f.factor(1).unwrap(),
            "x",
            &InversionConfig::default(),
        )
        .unwrap();
        largest_profile_gap(&q, gamma_profile)
    };

    let coarse = gap_for(2048);
    assert!(coarse <= 1e-3, "default grid off by {coarse:.3e}");
    let fine = gap_for(4096);
    assert!(fine <= 2.5e-4, "doubled grid off by {fine:.3e}");
    within(start, 10.0);
}

#[test]
fn criterion_04_pair_retrieval_marginals_forward_check_and_measure() {
    let start = Instant::now();
    let sd = SpectralDensity::ohmic(1.0).unwrap();
    let cfg = PairInversionConfig::for_cutoff(1.0);
    // measurement times on the wrapped transform lattice of the default grid
    let dt = (cfg.grid / 128) as f64 * 2.0 * cfg.t_max / cfg.grid as f64;
    let times: Vec<f64> = (0..64).map(|k| k as f64 * dt).collect();
    let f = qubit_pair_factors(&sd, &BathParams::default(), &times).unwrap();
    let (q, _) = invert_pair_correlated(&f, 1.0, &cfg).unwrap();

    let gap0 = largest_profile_gap(&q.marginal(0).unwrap(), gamma_profile);
    assert!(gap0 <= 2e-3, "first marginal off by {gap0:.3e}");
    let gap1 = largest_profile_gap(&q.marginal(1).unwrap(), |x| gamma_profile(-x));
    assert!(gap1 <= 2e-3, "second marginal off by {gap1:.3e}");

    let rs = root_system(4).unwrap();
    let fwd = forward_transform(&q, &rs, &times, TimeUnit::InverseCutoff).unwrap();
    let quartic = fwd.factor(9).unwrap();
    for (k, &t) in times.iter().enumerate() {
        let want = (1.0 + t * t).powi(-8);
        assert!(
            (quartic[k] - Complex64::new(want, 0.0)).norm() <= 1e-3,
            "recovered fourth-power factor at t = {t}: {}",
            quartic[k]
        );
    }

    assert!(q.min_density() < 0.0, "pair density should dip negative");
    let value = nonclassicality_negativity(&q).value;
    assert!(
        (value - 5.590826727675742).abs() <= 1e-6,
        "pair measure {value:.15}"
    );

    // coarse grid small enough for the reference solver to cross-check
    let coarse_cfg = PairInversionConfig {
        grid: 63,
        forward_check: false,
        ..PairInversionConfig::for_cutoff(1.0)
    };
    let (small, _) = invert_pair_correlated(&f, 1.0, &coarse_cfg).unwrap();
    let fast = nonclassicality_negativity(&small).value;
    let (lp, _) = nonclassicality_lp_with_cap(&small, DEFAULT_LP_CAP).unwrap();
    assert!(
        (fast - lp.value).abs() <= 1e-8,
        "closed form {fast} vs solver {}",
        lp.value
    );
    assert!(
        (lp.value - 3.097168436116703).abs() <= 1e-6,
        "coarse pair measure {:.15}",
        lp.value
    );
    within(start, 120.0);
}

#[test]
fn criterion_05_negativity_matches_the_lp_solver() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(42);

    for round in 0..500 {
        let q = if round % 2 == 0 {
            let len = rng.gen_range(2..=64);
            random_signed(&mut rng, &[len])
        } else {
            let a = rng.gen_range(2..=8);
            let b = rng.gen_range(2..=8);
            random_signed(&mut rng, &[a, b])
        };
        let fast = nonclassicality_negativity(&q).value;
        let (lp, _) = nonclassicality_lp_with_cap(&q, DEFAULT_LP_CAP).unwrap();
        assert!(
            (fast - lp.value).abs() <= 1e-8,
            "round {round}: {fast} vs {}",
            lp.value
        );
    }

    for round in 0..20 {
        let q = random_signed(&mut rng, &[64, 64]);
        let fast = nonclassicality_negativity(&q).value;
        let (lp, _) = nonclassicality_lp_with_cap(&q, DEFAULT_LP_CAP).unwrap();
        assert!(
            (fast - lp.value).abs() <= 1e-8,
            "full-cap grid {round}: {fast} vs {}",
            lp.value
        );
    }

    // the measure is convex under mixing
    for round in 0..200 {
        let p = random_signed(&mut rng, &[32]);
        let q = random_signed(&mut rng, &[32]);
        let w: f64 = rng.gen_range(0.0..1.0);
        let mix: Vec<f64> = p
            .density()
            .iter()
            .zip(q.density())
            .map(|(a, b)| w * a + (1.0 - w) * b)
            .collect();
        let m = cartan_grid(p.axes().to_vec(), mix);
        let bound = w * nonclassicality_negativity(&p).value
            + (1.0 - w) * nonclassicality_negativity(&q).value;
        let got = nonclassicality_negativity(&m).value;
        assert!(got <= bound + 1e-12, "mixture {round}: {got} > {bound}");
    }

    // genuine distributions measure exactly zero
    for round in 0..100 {
        let len = rng.gen_range(2..=64);
        let raw: Vec<f64> = (0..len).map(|_| rng.gen_range(0.0..1.0)).collect();
        let mass: f64 = raw.iter().sum::<f64>() * 0.5;
        let density: Vec<f64> = raw.iter().map(|v| v / mass).collect();
        let q = cartan_grid(
            vec![Axis {
                label: "x1".into(),
                min: -4.0,
                step: 0.5,
                len,
            }],
            density,
        );
        assert_eq!(
            nonclassicality_negativity(&q).value,
            0.0,
            "nonnegative round {round}"
        );
        if round % 10 == 0 {
            let (lp, _) = nonclassicality_lp_with_cap(&q, DEFAULT_LP_CAP).unwrap();
            assert!(lp.value.abs() <= 1e-8);
        }
    }
    within(start, 120.0);
}

#[test]
fn criterion_06_transform_of_point_mass_and_convolutions() {
    // a unit mass at the origin leaves every direction's factor at one
    let len = 41;
    let mut density = vec![0.0; len * len];
    density[20 * len + 20] = 1.0 / (0.125 * 0.125);
    let q = cartan_grid(
        vec![
            Axis {
                label: "x1".into(),
                min: -2.5,
                step: 0.125,
                len,
            },
            Axis {
                label: "x2".into(),
                min: -2.5,
                step: 0.125,
                len,
            },
        ],
        density,
    );
    let rs3 = root_system(3).unwrap();
    let times = uniform_times(3.0, 31);
    let f = forward_transform(&q, &rs3, &times, TimeUnit::InverseCutoff).unwrap();
    for idx in f.indices().collect::<Vec<_>>() {
        for (k, z) in f.factor(idx).unwrap().iter().enumerate() {
            assert!(
                (z - Complex64::new(1.0, 0.0)).norm() <= 1e-12,
                "factor {idx} at sample {k}: {z}"
            );
        }
    }

    // adding independent variables multiplies their factors
    let rs2 = root_system(2).unwrap();
    let times = uniform_times(4.0, 41);
    let transform = |profile: &dyn Fn(f64) -> f64, len: usize| -> Vec<Complex64> {
        let (min, step) = (-8.0, 0.02);
        let raw: Vec<f64> = (0..len).map(|i| profile(min + i as f64 * step)).collect();
        let mass: f64 = raw.iter().sum::<f64>() * step;
        let density: Vec<f64> = raw.iter().map(|v| v / mass).collect();
        let q = cartan_grid(
            vec![Axis {
                label: "x".into(),
                min,
                step,
                len,
            }],
            density,
        );
        forward_transform(&q, &rs2, &times, TimeUnit::InverseCutoff)
            .unwrap()
            .factor(1)
            .unwrap()
            .to_vec()
    };

    let gauss = |mu: f64, sigma: f64| {
        move |x: f64| (-((x - mu) / sigma).powi(2) / 2.0).exp() / (sigma * (2.0 * PI).sqrt())
    };
    let fa = transform(&gauss(-1.2, 0.6), 801);
    let fb = transform(&gauss(2.0, 0.9), 801);
    let fc = transform(&gauss(0.8, (0.36f64 + 0.81).sqrt()), 801);
    for k in 0..times.len() {
        assert!(
            (fc[k] - fa[k] * fb[k]).norm() <= 1e-4,
            "gaussian product at sample {k}"
        );
    }

    // gamma profile convolved with itself: shape parameter doubles
    let heavier = |x: f64| {
        let u = x + 8.0;
        if u < 0.0 {
            0.0
        } else {
            u.powi(7) * (-u).exp() / 5040.0
        }
    };
    let fa = transform(&gamma_profile, 2401);
    let fc = transform(&heavier, 2401);
    for k in 0..times.len() {
        assert!(
            (fc[k] - fa[k] * fa[k]).norm() <= 1e-4,
            "gamma product at sample {k}"
        );
    }
}

#[test]
fn criterion_07_process_matrix_round_trip() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let times = vec![0.0, 0.7, 1.3, 2.1];
    for trial in 0..100 {
        let n = 2 + trial % 3;
        let rs = root_system(n).unwrap();
        let mut factors = BTreeMap::new();
        for &idx in rs.positive_indices() {
            let series: Vec<Complex64> = (0..times.len())
                .map(|k| {
                    if k == 0 {
                        Complex64::new(1.0, 0.0)
                    } else {
                        Complex64::from_polar(
                            rng.gen_range(0.0..1.0),
                            rng.gen_range(0.0..2.0 * PI),
                        )
                    }
                })
                .collect();
            factors.insert(idx, series);
        }
        let f = DephasingFactors::new(n, times.clone(), factors, TimeUnit::InverseCutoff).unwrap();
        let maps = map_from_factors(&f).unwrap();
        let gens = GeneratorSet::new(n).unwrap();
        let chi = chi_from_map(&maps, &gens).unwrap();
        let back = reconstruct_from_chi(&chi, &gens).unwrap();
        for k in 0..times.len() {
            let a = maps.map_at(k);
            let b = back.map_at(k);
            let gap = a
                .iter()
                .zip(b.iter())
                .map(|(x, y)| (x - y).abs())
                .fold(0.0, f64::max);
            assert!(gap <= 1e-10, "trial {trial} sample {k}: map gap {gap:.3e}");

            // the top-left map entry is fixed by the process-matrix diagonal
            let c = chi.chi_at(k);
            let mut top = c[(0, 0)].re;
            for l in 1..c.nrows() {
                top += 2.0 / n as f64 * c[(l, l)].re;
            }
            assert!(
                (top - a[(0, 0)]).abs() <= 1e-10,
                "trial {trial} sample {k}: {top} vs {}",
                a[(0, 0)]
            );
        }
    }
    within(start, 30.0);
}

#[test]
fn criterion_08_exchange_qubit_tomography() {
    let start = Instant::now();

    let chain = |params: &ST0Params| {
        let times = fid_time_grid(params, 10.0, 256).unwrap();
        let probs = simulate_return_probs(params, &times).unwrap();
        let traj = probs.trajectory().unwrap();
        let fit = identify_axis(&traj).unwrap();
        let (q, _) = recover_distribution(&traj, &fit, &fid_inversion_config()).unwrap();
        (fit, q)
    };
    let stats = |q: &QuasiDistribution| -> (f64, f64) {
        let ax = &q.axes()[0];
        let mean: f64 = q
            .density()
            .iter()
            .enumerate()
            .map(|(i, &d)| (ax.min + i as f64 * ax.step) * d)
            .sum::<f64>()
            * ax.step;
        let var: f64 = q
            .density()
            .iter()
            .enumerate()
            .map(|(i, &d)| {
                let x = ax.min + i as f64 * ax.step - mean;
                x * x * d
            })
            .sum::<f64>()
            * ax.step;
        (mean, var.max(0.0).sqrt())
    };

    let mut noiseless = Vec::new();
    for (exchange, pin) in [(0.37, 7.531603841882305e-3), (1.5, 3.0751200856617111e-1)] {
        let params = ST0Params::with_exchange(exchange);
        let split = 2.0 * params.g_factor * params.mu_b * params.gradient;
        let omega = (exchange * exchange + split * split).sqrt() / params.hbar;
        let (fit, q) = chain(&params);
        assert!(
            (fit.omega - omega).abs() <= 1e-3 * omega,
            "J = {exchange}: fitted {} vs {omega}",
            fit.omega
        );
        let (mean, _) = stats(&q);
        assert!(mean > 0.0, "J = {exchange}: recovered mean {mean}");
        assert!(
            (mean - omega).abs() <= 1e-2 * omega,
            "J = {exchange}: recovered mean {mean} vs {omega}"
        );
        let value = nonclassicality_negativity(&q).value;
        assert!(
            (value - pin).abs() <= 1e-6 * pin,
            "J = {exchange}: measure {value:.16e} vs pin {pin:.16e}"
        );
        noiseless.push(value);
    }
    assert!(
        noiseless[1] >= noiseless[0],
        "stronger exchange should not look more classical"
    );

    // halving the dephasing time broadens the recovered distribution
    let (_, sharp) = chain(&ST0Params::default());
    let (_, broad) = chain(&ST0Params {
        t2star: 15.0,
        ..ST0Params::default()
    });
    assert!(
        stats(&broad).1 > stats(&sharp).1,
        "faster dephasing should widen the peak"
    );

    // measurement noise can only hide the effect, never amplify it
    let params = ST0Params::default();
    let times = fid_time_grid(&params, 10.0, 256).unwrap();
    let clean = noise_study(
        &params,
        &times,
        &NoiseConfig {
            sigma: 0.0,
            repeats: 5,
            seed: 7,
        },
    )
    .unwrap();
    assert!((clean.mean - noiseless[0]).abs() <= 1e-12);
    assert_eq!(clean.failures, 0);
    let mid = noise_study(
        &params,
        &times,
        &NoiseConfig {
            sigma: 0.025,
            repeats: 200,
            seed: 7,
        },
    )
    .unwrap();
    let loud = noise_study(
        &params,
        &times,
        &NoiseConfig {
            sigma: 0.05,
            repeats: 200,
            seed: 7,
        },
    )
    .unwrap();
    assert_eq!(mid.failures, 0);
    assert_eq!(loud.failures, 0);
    assert!(loud.mean < noiseless[0], "noise must not add structure");
    assert!(mid.mean <= clean.mean + 1e-6);
    assert!(loud.mean <= mid.mean + 1e-6);
    assert!(
        loud.mean >= 0.0 && loud.mean < 5e-7,
        "noisy mean {:.3e}",
        loud.mean
    );

    within(start, 120.0);
}

#[test]
fn criterion_09_mode_discretization_and_oracle_agreement() {
    let start = Instant::now();
    let sd = SpectralDensity::ohmic(1.0).unwrap();
    let probe: Vec<f64> = (0..=60).map(|k| k as f64 * 8.0 / 60.0).collect();
    let mut last = f64::INFINITY;
    for n_modes in [16usize, 32, 64, 128] {
        let bath = discretize_bath(&sd, n_modes).unwrap();
        let err = probe
            .iter()
            .map(|&t| (bath.phi(t, 0.0) - 2.0 * (1.0 + t * t).ln()).abs())
            .fold(0.0, f64::max);
        assert!(
            err <= last / 2.0,
            "{n_modes} modes: error {err:.3e} vs previous {last:.3e}"
        );
        last = err;
    }

    let modes = vec![
        Mode {
            omega: 1.0,
            g1: Complex64::new(0.25, 0.0),
            g2: Complex64::new(0.1, 0.05),
        },
        Mode {
            omega: 1.9,
            g1: Complex64::new(0.15, -0.1),
            g2: Complex64::new(0.0, 0.2),
        },
        Mode {
            omega: 2.7,
            g1: Complex64::new(0.1, 0.0),
            g2: Complex64::new(-0.15, 0.1),
        },
    ];
    let times = uniform_times(4.0, 21);
    for temperature in [0.0, 0.5] {
        let analytic = reduced_coherences(
            &ModeConfig {
                modes: modes.clone(),
                fock_cutoff: 0,
                temperature,
                method: OracleMethod::AnalyticDisplacement,
            },
            &times,
        )
        .unwrap();
        let numeric = reduced_coherences(
            &ModeConfig {
                modes: modes.clone(),
                fock_cutoff: 28,
                temperature,
                method: OracleMethod::TruncatedFock,
            },
            &times,
        )
        .unwrap();
        for idx in analytic.indices().collect::<Vec<_>>() {
            let a = analytic.factor(idx).unwrap();
            let b = numeric.factor(idx).unwrap();
            for (k, (x, y)) in a.iter().zip(b).enumerate() {
                assert!(
                    (x - y).norm() <= 1e-8,
                    "T = {temperature}, factor {idx}, sample {k}: {x} vs {y}"
                );
            }
        }
    }
    within(start, 120.0);
}

#[test]
fn criterion_10_relative_phase_sweep_properties() {
    let bath = discretize_bath(&SpectralDensity::ohmic(1.0).unwrap(), 8).unwrap();
    let cfg = ModeConfig {
        modes: bath.pair_modes(0.0),
        fock_cutoff: 8,
        temperature: 0.0,
        method: OracleMethod::AnalyticDisplacement,
    };
    let rs = root_system(2).unwrap();
    let value_at = |phi_rel: f64, samples: usize| -> f64 {
        let times = uniform_times(8.0, samples);
        let f = relative_phase_factor(phi_rel, &cfg, &times, 0.5).unwrap();
        nonclassicality_of_dynamics(&f, &rs).unwrap().0.value
    };

    for step in 0..9 {
        let phi_rel = step as f64 * 2.0 * PI / 8.0;
        let v = value_at(phi_rel, 129);
        assert!(v.is_finite() && v >= 0.0, "phi_rel {phi_rel}: {v}");
    }

    // refining the measurement grid barely moves the answer
    let coarse = value_at(2.2, 129);
    let fine = value_at(2.2, 257);
    assert!(
        (fine - coarse).abs() < 2e-4,
        "refinement moved the value by {:.3e}",
        (fine - coarse).abs()
    );
    // and repeating it moves nothing at all
    assert_eq!(value_at(2.2, 129).to_bits(), coarse.to_bits());
}
