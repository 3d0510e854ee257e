use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::geometry::{build_mesh, Block, BlockSet, GridSpec, Mesh, Polygon};
use crate::gmrf::{precision_ar1, CsrMatrix, SparseSym};
use crate::model::{
    assemble, Hyperparams, InsituObs, LinearGaussianSystem, ModelKind, ObservationSet, SatelliteObs,
};

struct Instance {
    mesh: Mesh,
    blocks: BlockSet,
    obs: ObservationSet,
}

fn instance(seed: u64, h: f64, t_len: usize) -> Instance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dom = Polygon::rectangle(0.0, 0.0, 1.0, 1.0).unwrap();
    let mesh = build_mesh(&dom, h, 0.0, h).unwrap();
    let grid = GridSpec {
        x0: 0.0,
        y0: 0.0,
        dx: 0.5,
        dy: 0.5,
        nx: 2,
        ny: 2,
    };
    let blocks = BlockSet::from_grid(&grid).unwrap();
    let mut insitu = Vec::new();
    let mut satellite = Vec::new();
    let sites: Vec<[f64; 2]> = (0..3)
        .map(|_| [rng.random_range(0.0..1.0), rng.random_range(0.0..1.0)])
        .collect();
    for t in 1..=t_len {
        for (i, p) in sites.iter().enumerate() {
            if rng.random::<f64>() < 0.8 {
                insitu.push(InsituObs {
                    site_id: i,
                    x: p[0],
                    y: p[1],
                    t,
                    value: rng.random_range(-1.0..2.0),
                });
            }
        }
        for b in 0..4 {
            if rng.random::<f64>() < 0.6 {
                satellite.push(SatelliteObs {
                    block_id: b,
                    t,
                    value: rng.random_range(-1.0..2.0),
                });
            }
        }
    }
    if !insitu.iter().any(|r| r.site_id == 0 && r.t == 1) {
        insitu.insert(
            0,
            InsituObs {
                site_id: 0,
                x: sites[0][0],
                y: sites[0][1],
                t: 1,
                value: 0.3,
            },
        );
    }
    let obs = ObservationSet::new(t_len, insitu, satellite, dom.centroid()).unwrap();
    Instance { mesh, blocks, obs }
}

fn random_theta(rng: &mut ChaCha8Rng) -> Hyperparams {
    Hyperparams::from_variance(
        rng.random_range(1.0..8.0),
        rng.random_range(0.1..1.0),
        rng.random_range(-0.9..0.9),
        rng.random_range(2.0..80.0),
        rng.random_range(2.0..80.0),
    )
    .unwrap()
}

fn dense_prior(sys: &LinearGaussianSystem, th: &Hyperparams) -> DMatrix<f64> {
    let qs = sys.operator().precision(th.kappa, th.tau_omega).to_dense();
    let qt = precision_ar1(th.rho, sys.t_len()).unwrap().to_dense();
    let q = qt.kronecker(&qs);
    let n = sys.dim();
    let mut out = DMatrix::zeros(n, n);
    out.view_mut((0, 0), (q.nrows(), q.ncols())).copy_from(&q);
    let prec = 1.0 / (sys.fixed_prior_sd() * sys.fixed_prior_sd());
    for k in q.nrows()..n {
        out[(k, k)] = prec;
    }
    out
}

struct DenseOracle {
    log_marginal: f64,
    mean: DVector<f64>,
    cov: DMatrix<f64>,
}

fn dense_oracle(sys: &LinearGaussianSystem, th: &Hyperparams) -> DenseOracle {
    let q = dense_prior(sys, th);
    let h = sys.design().to_dense();
    let tau = DVector::from_vec(sys.noise_precision(th));
    let z = DVector::from_column_slice(sys.z());
    let sigma_u = q.clone().try_inverse().unwrap();
    let sz = &h * &sigma_u * h.transpose() + DMatrix::from_diagonal(&tau.map(|t| 1.0 / t));
    let chol = sz.clone().cholesky().unwrap();
    let logdet: f64 = 2.0 * chol.l().diagonal().map(|x| x.ln()).sum();
    let alpha = chol.solve(&z);
    let n = z.len() as f64;
    let log_marginal =
        -0.5 * n * (2.0 * std::f64::consts::PI).ln() - 0.5 * logdet - 0.5 * z.dot(&alpha);
    let post = &q + h.transpose() * DMatrix::from_diagonal(&tau) * &h;
    let cov = post.try_inverse().unwrap();
    let mean = &cov
        * h.transpose()
        * DVector::from_iterator(z.len(), z.iter().zip(tau.iter()).map(|(a, b)| a * b));
    DenseOracle {
        log_marginal,
        mean,
        cov,
    }
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1.0)
}

#[test]
fn evaluator_matches_dense_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for seed in 0..6 {
        let inst = instance(seed, 0.34, 3);
        for kind in ModelKind::ALL {
            let th = random_theta(&mut rng);
            let sys = assemble(kind, &inst.obs, &inst.mesh, &inst.blocks, th).unwrap();
            assert!(sys.n_field() <= 60);
            let oracle = dense_oracle(&sys, &th);
            let ev = Evaluator::new(&sys).unwrap().evaluate(&th).unwrap();
            assert!(
                rel(ev.log_marginal, oracle.log_marginal) < 1e-8,
                "{} vs {}",
                ev.log_marginal,
                oracle.log_marginal
            );
            let sel = ev.conditional.selected_inverse();
            for i in 0..sys.dim() {
                assert!(rel(ev.conditional.mean()[i], oracle.mean[i]) < 1e-8);
                assert!(rel(sel.diag()[i], oracle.cov[(i, i)]) < 1e-8);
            }
            assert!(
                rel(
                    log_marginal_likelihood(&th, &sys).unwrap(),
                    oracle.log_marginal
                ) < 1e-8
            );
        }
    }
}

#[test]
fn slow_and_fast_paths_agree() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let inst = instance(3, 0.25, 4);
    let th = random_theta(&mut rng);
    let sys = assemble(ModelKind::Fusion, &inst.obs, &inst.mesh, &inst.blocks, th).unwrap();
    let slow = GaussianLinearModel::new(
        sys.prior_precision(&th).unwrap(),
        sys.design().clone(),
        sys.noise_precision(&th),
        sys.z().to_vec(),
    )
    .unwrap();
    let ev = Evaluator::new(&sys).unwrap();
    let fast = ev.evaluate(&th).unwrap();
    assert!(rel(slow.log_marginal().unwrap(), fast.log_marginal) < 1e-9);
    assert!(
        rel(
            sys.prior_logdet(&th).unwrap(),
            ev.prior_logdet(&th).unwrap()
        ) < 1e-10
    );
    let post = slow.posterior().unwrap();
    for (a, b) in post.mean().iter().zip(fast.conditional.mean()) {
        assert!(rel(*a, *b) < 1e-9);
    }
    // Evaluation-point invariance of the marginal-likelihood identity.
    for _ in 0..5 {
        let u: Vec<f64> = (0..sys.dim())
            .map(|_| rng.random_range(-2.0..2.0))
            .collect();
        assert!((slow.log_marginal_at(&u).unwrap() - fast.log_marginal).abs() < 1e-8);
    }
    let zero = vec![0.0; sys.dim()];
    assert!((slow.log_marginal_at(&zero).unwrap() - fast.log_marginal).abs() < 1e-8);
}

#[test]
fn posterior_minus_prior_is_data_term() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let inst = instance(1, 0.34, 3);
    let th = random_theta(&mut rng);
    let sys = assemble(ModelKind::Fusion, &inst.obs, &inst.mesh, &inst.blocks, th).unwrap();
    let ev = Evaluator::new(&sys).unwrap();
    let diff = ev.posterior_precision(&th).to_dense() - ev.prior_precision(&th).to_dense();
    let gram = sys
        .design()
        .weighted_gram(&sys.noise_precision(&th))
        .to_dense();
    assert!((diff - gram).abs().max() < 1e-10);
}

#[test]
fn no_observations_leave_prior() {
    let q = SparseSym::from_triplets(2, &[(0, 0, 2.0), (1, 1, 3.0), (1, 0, 0.5)]).unwrap();
    let m = GaussianLinearModel::new(q.clone(), CsrMatrix::new(2), vec![], vec![]).unwrap();
    let post = m.posterior().unwrap();
    assert_eq!(post.mean(), &[0.0, 0.0]);
    assert_eq!(m.posterior_precision().to_dense(), q.to_dense());
    assert!(m.log_marginal().unwrap().abs() < 1e-12);
}

fn tiny_fit(kind: ModelKind, grid: GridStrategy) -> (Instance, FitResult) {
    let inst = instance(21, 0.25, 5);
    let obs = inst.obs.through_day(4);
    let sys = assemble(
        kind,
        &obs,
        &inst.mesh,
        &inst.blocks,
        Hyperparams::simulation_truth(),
    )
    .unwrap();
    let opt = OptimizerConfig {
        grid,
        ..OptimizerConfig::default()
    };
    let f = fit(&sys, &PriorSpec::default(), &opt).unwrap();
    (inst, f)
}

#[test]
fn mode_only_grid() {
    let (_, f) = tiny_fit(ModelKind::Fusion, GridStrategy::Mode);
    assert_eq!(f.points.len(), 1);
    assert_eq!(f.points[0].weight, 1.0);
    assert!(f.points[0].log_posterior >= f.start_log_posterior);
    for s in &f.summaries {
        assert!(s.q025 <= s.mean && s.mean <= s.q975, "{s:?}");
    }
    let b = f.summary("beta1").unwrap();
    assert!(((b.q975 - b.mean) - (b.mean - b.q025)).abs() < 1e-5);
}

#[test]
fn ccd_grid_invariants() {
    let (_, f) = tiny_fit(ModelKind::Fusion, GridStrategy::Ccd);
    assert_eq!(f.points.len(), 11);
    let total: f64 = f.points.iter().map(|p| p.weight).sum();
    assert!((total - 1.0).abs() < 1e-12);
    assert!(f.points.iter().all(|p| p.weight >= 0.0));
    let best = f.points[f.mode].log_posterior;
    assert!(f.points.iter().all(|p| p.log_posterior <= best));
    assert!(best >= f.start_log_posterior);
    assert!(f.summary("a").is_some());
    let (_, g) = tiny_fit(ModelKind::Insitu, GridStrategy::Ccd);
    assert_eq!(g.points.len(), 9);
    assert!(g.summary("a").is_none() && g.summary("tau1").is_none());
}

#[test]
fn trimmed_objective_is_exact() {
    let inst = instance(4, 0.34, 5);
    let obs = inst.obs.through_day(3);
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let th = random_theta(&mut rng);
    let sys = assemble(ModelKind::Fusion, &obs, &inst.mesh, &inst.blocks, th).unwrap();
    let full = log_marginal_likelihood(&th, &sys).unwrap();
    let cut = log_marginal_likelihood(&th, &sys.restrict_days(3).unwrap()).unwrap();
    assert!((full - cut).abs() < 1e-8, "{full} vs {cut}");
}

#[test]
fn missing_rows_are_ignorable() {
    let inst = instance(8, 0.25, 4);
    let th = Hyperparams::simulation_truth();
    let full = assemble(ModelKind::Fusion, &inst.obs, &inst.mesh, &inst.blocks, th).unwrap();
    let drop = [0usize, 2];
    let dropped = full.drop_rows(&drop).unwrap();
    let mut fewer = inst.obs.clone();
    for &r in drop.iter().rev() {
        fewer.satellite.remove(r);
    }
    let never = assemble(ModelKind::Fusion, &fewer, &inst.mesh, &inst.blocks, th).unwrap();
    let opt = OptimizerConfig::default();
    let a = fit(&dropped, &PriorSpec::default(), &opt).unwrap();
    let b = fit(&never, &PriorSpec::default(), &opt).unwrap();
    for (x, y) in a.summaries.iter().zip(&b.summaries) {
        assert_eq!(x.name, y.name);
        for (u, v) in [
            (x.mean, y.mean),
            (x.sd, y.sd),
            (x.q025, y.q025),
            (x.q975, y.q975),
        ] {
            assert!((u - v).abs() <= 1e-10 * u.abs().max(1.0));
        }
    }
}

#[test]
fn prediction_behaviour() {
    let inst = instance(30, 0.25, 6);
    let obs = inst.obs.through_day(4);
    let sys = assemble(
        ModelKind::Fusion,
        &obs,
        &inst.mesh,
        &inst.blocks,
        Hyperparams::simulation_truth(),
    )
    .unwrap();
    let f = fit(&sys, &PriorSpec::default(), &OptimizerConfig::default()).unwrap();

    // Field part contracts by ρ per day past the last observed day.
    let g = sys.n_vertices();
    let p = &f.points[0];
    let rho = p.theta.rho;
    let m = p.conditional.mean();
    for v in 0..g {
        let (m4, m5, m6) = (m[3 * g + v], m[4 * g + v], m[5 * g + v]);
        assert!((m5 - rho * m4).abs() < 1e-8 * m4.abs().max(1.0));
        assert!((m6 - rho * rho * m4).abs() < 1e-8 * m4.abs().max(1.0));
    }

    let pts = [[0.2, 0.3], [0.7, 0.7], [0.5, 0.1]];
    let train: Vec<Target> = (1..=4)
        .flat_map(|t| pts.iter().map(move |&p| Target::point(p, t)))
        .collect();
    let test: Vec<Target> = (5..=6)
        .flat_map(|t| pts.iter().map(move |&p| Target::point(p, t)))
        .collect();
    let sd_train: f64 = predict(&f, &inst.mesh, &train)
        .unwrap()
        .iter()
        .map(|p| p.sd)
        .sum::<f64>()
        / train.len() as f64;
    let sd_test: f64 = predict(&f, &inst.mesh, &test)
        .unwrap()
        .iter()
        .map(|p| p.sd)
        .sum::<f64>()
        / test.len() as f64;
    assert!(sd_test > sd_train);

    let out = predict(&f, &inst.mesh, &train).unwrap();
    let means = predict_mean(&f, &inst.mesh, &train).unwrap();
    for (o, m) in out.iter().zip(&means) {
        assert!((o.mean - m).abs() < 1e-12);
        assert!(o.q025 < o.mean && o.mean < o.q975);
    }
    let outside = [Target::point([3.0, 3.0], 1)];
    assert!(matches!(
        predict(&f, &inst.mesh, &outside),
        Err(crate::Error::Geometry(_))
    ));

    // A missing block-day gets a predictive law including the bias.
    let cell = Block::Rect {
        x0: 0.0,
        y0: 0.0,
        dx: 0.5,
        dy: 0.5,
    };
    let latent = Target {
        site: TargetSite::Block(cell.clone()),
        t: 2,
        observation: false,
    };
    let measured = Target {
        site: TargetSite::Block(cell),
        t: 2,
        observation: true,
    };
    let r = predict(&f, &inst.mesh, &[latent, measured]).unwrap();
    let a = f.summary("a").unwrap().mean;
    assert!((r[1].mean - r[0].mean - a).abs() < 1e-9);
    assert!(r[1].sd > r[0].sd);
}

#[test]
fn precise_site_is_tracked() {
    let inst = instance(12, 0.25, 3);
    let site = inst.obs.insitu[0];
    let th = Hyperparams::from_variance(3.0, 0.3, 0.5, 50.0, 1e6).unwrap();
    let sys = assemble(ModelKind::Insitu, &inst.obs, &inst.mesh, &inst.blocks, th).unwrap();
    let opt = OptimizerConfig {
        grid: GridStrategy::Mode,
        init: th.to_theta(),
        max_evals: 1,
        restarts: 0,
        tol: f64::INFINITY,
        ..OptimizerConfig::default()
    };
    let f = fit(&sys, &PriorSpec::default(), &opt).unwrap();
    let p = predict(&f, &inst.mesh, &[Target::point([site.x, site.y], site.t)]).unwrap();
    assert!((p[0].mean - site.value).abs() < 3.0 / 1e6f64.sqrt());
}

#[test]
fn posterior_samples() {
    let (_, f) = tiny_fit(ModelKind::Fusion, GridStrategy::Mode);
    let s = sample_posterior(&f, 4000, 3, false).unwrap();
    let again = sample_posterior(&f, 4000, 3, false).unwrap();
    assert_eq!(s, again);
    let n_field = f.system.n_field();
    let cond = &f.points[0].conditional;
    for k in 0..f.system.n_fixed() {
        let draws: Vec<f64> = s.fixed.iter().map(|d| d[k]).collect();
        let mean = draws.iter().sum::<f64>() / draws.len() as f64;
        let sd = cond.linear_variance_by_solve(&[(n_field + k, 1.0)]).sqrt();
        assert!((mean - cond.mean()[n_field + k]).abs() < 3.0 * sd / (draws.len() as f64).sqrt());
    }
}

#[test]
fn mixture_quantiles() {
    let q = mixture_quantile(&[1.0], &[2.0], &[3.0], 0.975);
    assert!((q - (2.0 + 3.0 * 1.959_964)).abs() < 1e-5);
    let q = mixture_quantile(&[0.5, 0.5], &[-1.0, 1.0], &[0.5, 0.5], 0.5);
    assert!(q.abs() < 1e-5);
}

#[test]
fn stored_grid_reproduces_fit() {
    let (inst, f) = tiny_fit(ModelKind::Fusion, GridStrategy::Ccd);
    let grid: Vec<(Hyperparams, f64)> = f
        .points
        .iter()
        .map(|p| (p.theta, p.log_posterior))
        .collect();
    let sys = assemble(
        ModelKind::Fusion,
        &inst.obs.through_day(4),
        &inst.mesh,
        &inst.blocks,
        Hyperparams::simulation_truth(),
    )
    .unwrap();
    let g = fit_from_grid(&sys, &PriorSpec::default(), &grid, f.start_log_posterior).unwrap();
    assert_eq!(g.summaries, f.summaries);
    assert_eq!(g.mode, f.mode);
    let t = [Target::point([0.4, 0.6], 5)];
    assert_eq!(
        predict(&g, &inst.mesh, &t).unwrap(),
        predict(&f, &inst.mesh, &t).unwrap()
    );
    assert!(fit_from_grid(&sys, &PriorSpec::default(), &[], 0.0).is_err());
}
