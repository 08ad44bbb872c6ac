use hkdyn_core::config::{communication_graph, neighbors};
use hkdyn_core::diagnostics::{check_nd_lemmas, is_nontrivial, nd_partition, CaseTag};
use hkdyn_core::dynamics::NoiseQuery;
use hkdyn_core::experiments::{run_sweep, social_convergence_time, SweepSpec, DEFAULT_BUDGET};
use hkdyn_core::graphs::{is_friendly_transition, EdgeAddition, GraphSchedule};
use hkdyn_core::spectral::{active_energy, energy, spectral_report};
use hkdyn_core::{
    run, step_classical, step_nd, step_nd_pairwise, step_social, Configuration, Model, NoiseMode,
    NoiseSource, RunOptions, SocialGraph, StopReason, StopRule,
};
use proptest::prelude::*;

fn config(max_n: usize, max_d: usize, side: f64) -> impl Strategy<Value = Configuration> {
    (1..=max_n, 1..=max_d).prop_flat_map(move |(n, d)| {
        prop::collection::vec(prop::collection::vec(0.0..side, d), n)
            .prop_map(|pts| Configuration::new(pts, 1.0).unwrap())
    })
}

fn line(max_n: usize, side: f64) -> impl Strategy<Value = Configuration> {
    config(max_n, 1, side)
}

fn with_graph(
    c: impl Strategy<Value = Configuration>,
) -> impl Strategy<Value = (Configuration, SocialGraph)> {
    c.prop_flat_map(|x| {
        let n = x.n();
        let pairs: Vec<(usize, usize)> = (0..n)
            .flat_map(|i| (i + 1..n).map(move |j| (i, j)))
            .collect();
        prop::collection::vec(any::<bool>(), pairs.len()).prop_map(move |keep| {
            let edges = pairs.iter().zip(&keep).filter(|(_, &k)| k).map(|(&e, _)| e);
            (x.clone(), SocialGraph::from_edges(n, edges).unwrap())
        })
    })
}

fn bits(x: &Configuration) -> Vec<u64> {
    x.coords().iter().map(|v| v.to_bits()).collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn neighborhoods_are_symmetric_and_reflexive((x, g) in with_graph(config(10, 2, 3.0))) {
        for i in 0..x.n() {
            let ni = neighbors(&x, Some(&g), i).unwrap();
            prop_assert!(ni.contains(&i));
            for &j in &ni {
                prop_assert!(neighbors(&x, Some(&g), j).unwrap().contains(&i));
            }
        }
        let cg = communication_graph(&x, Some(&g)).unwrap();
        for i in 0..x.n() {
            prop_assert!(cg.is_adjacent(i, i));
            for j in 0..x.n() {
                prop_assert_eq!(cg.is_adjacent(i, j), cg.is_adjacent(j, i));
            }
        }
    }

    #[test]
    fn complete_graph_is_classical(x in config(12, 3, 4.0)) {
        let complete = SocialGraph::complete(x.n());
        prop_assert_eq!(
            communication_graph(&x, Some(&complete)).unwrap(),
            communication_graph(&x, None).unwrap()
        );
        prop_assert_eq!(bits(&step_social(&x, &complete).unwrap()), bits(&step_classical(&x)));
    }

    #[test]
    fn zero_noise_is_classical(x in line(12, 6.0), t in 0usize..50) {
        let classical = bits(&step_classical(&x));
        prop_assert_eq!(bits(&step_nd(&x, &NoiseSource::zero(NoiseMode::PerAgent), t).unwrap()), classical.clone());
        prop_assert_eq!(bits(&step_nd_pairwise(&x, &NoiseSource::zero(NoiseMode::PerPair), t).unwrap()), classical);
    }

    #[test]
    fn agent_order_is_unobservable((x, g) in with_graph(config(8, 2, 3.0)), shift in 1usize..8) {
        // relabel agents by a rotation and compare the relabelled successor
        let n = x.n();
        let perm: Vec<usize> = (0..n).map(|i| (i + shift) % n).collect();
        let xp = Configuration::new(perm.iter().map(|&k| x.point(k).to_vec()).collect(), 1.0).unwrap();
        let mut inv = vec![0; n];
        for (new, &old) in perm.iter().enumerate() {
            inv[old] = new;
        }
        let gp = SocialGraph::from_edges(n, g.edges().map(|(i, j)| (inv[i], inv[j]))).unwrap();
        let y = step_social(&x, &g).unwrap();
        let yp = step_social(&xp, &gp).unwrap();
        for (new, &old) in perm.iter().enumerate() {
            for (a, b) in yp.point(new).iter().zip(y.point(old)) {
                prop_assert!((a - b).abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn social_step_stays_in_neighborhood_hull((x, g) in with_graph(config(10, 2, 3.0))) {
        let y = step_social(&x, &g).unwrap();
        for i in 0..x.n() {
            let nb = neighbors(&x, Some(&g), i).unwrap();
            for k in 0..x.dim() {
                let lo = nb.iter().map(|&j| x.point(j)[k]).fold(f64::INFINITY, f64::min);
                let hi = nb.iter().map(|&j| x.point(j)[k]).fold(f64::NEG_INFINITY, f64::max);
                prop_assert!(y.point(i)[k] >= lo - 1e-12 && y.point(i)[k] <= hi + 1e-12);
            }
        }
    }

    #[test]
    fn classical_preserves_order(x in line(15, 5.0)) {
        let y = step_classical(&x);
        let (a, b) = (x.coords(), y.coords());
        for i in 0..x.n() {
            for j in 0..x.n() {
                if a[i] <= a[j] {
                    prop_assert!(b[i] <= b[j]);
                }
            }
        }
    }

    #[test]
    fn nd_hull_is_monotone(x in line(10, 5.0), seed in any::<u64>(), pairwise in any::<bool>()) {
        let n = x.n().max(2);
        let eps = 0.99 / (n - 1) as f64;
        let (model, mode) = if pairwise { (Model::NdPairwise, NoiseMode::PerPair) } else { (Model::Nd, NoiseMode::PerAgent) };
        let noise = NoiseSource::uniform(eps, mode, seed).unwrap();
        let traj = run(model, x, None, Some(&noise), &StopRule::steps(20), &RunOptions::default()).unwrap();
        for w in traj.configs.windows(2) {
            let (lo0, hi0) = w[0].hull_1d();
            let (lo1, hi1) = w[1].hull_1d();
            prop_assert!(lo1 >= lo0 - 1e-12 && hi1 <= hi0 + 1e-12);
        }
    }

    #[test]
    fn consensus_is_fixed(v in -5.0f64..5.0, n in 1usize..8, seed in any::<u64>()) {
        let x = Configuration::line(&vec![v; n]).unwrap();
        let g = SocialGraph::empty(n);
        prop_assert_eq!(&step_classical(&x), &x);
        prop_assert_eq!(&step_social(&x, &g).unwrap(), &x);
        prop_assert_eq!(&step_nd(&x, &NoiseSource::uniform(0.1, NoiseMode::PerAgent, seed).unwrap(), 3).unwrap(), &x);
        prop_assert_eq!(&step_nd_pairwise(&x, &NoiseSource::uniform(0.1, NoiseMode::PerPair, seed).unwrap(), 3).unwrap(), &x);
    }

    #[test]
    fn uniform_noise_within_bound(eps in 0.0f64..1.0, seed in any::<u64>(), t in 0usize..1000, i in 0usize..50, j in 0usize..50) {
        let x = Configuration::line(&[0.0]).unwrap();
        for (mode, pair) in [(NoiseMode::PerAgent, None), (NoiseMode::PerPair, Some(j))] {
            let noise = NoiseSource::uniform(eps, mode, seed).unwrap();
            let v = noise.value(&NoiseQuery { t, agent: i, pair, state: &x }).unwrap();
            prop_assert!(v.abs() <= eps);
        }
    }

    #[test]
    fn trajectories_keep_shape((x, g) in with_graph(config(8, 2, 3.0))) {
        let traj = run(Model::Social, x.clone(), Some(&GraphSchedule::fixed(g)), None, &StopRule::steps(10), &RunOptions::default()).unwrap();
        for c in &traj.configs {
            prop_assert_eq!((c.n(), c.dim(), c.confidence()), (x.n(), x.dim(), x.confidence()));
        }
    }

    #[test]
    fn energy_never_increases((x, g) in with_graph(config(12, 2, 4.0))) {
        let traj = run(Model::Social, x, Some(&GraphSchedule::fixed(g.clone())), None, &StopRule::steps(30), &RunOptions::default()).unwrap();
        for w in traj.configs.windows(2) {
            prop_assert!(energy(&w[1], Some(&g)).unwrap() <= energy(&w[0], Some(&g)).unwrap() + 1e-9);
        }
    }

    #[test]
    fn edge_addition_is_friendly_and_monotone((x, g) in with_graph(config(10, 2, 4.0)), seed in any::<u64>()) {
        let schedule = GraphSchedule::policy(g, EdgeAddition { p_add: 0.05, seed }).friendly(true);
        let traj = run(Model::Social, x, Some(&schedule), None, &StopRule::steps(30), &RunOptions::default()).unwrap();
        for t in 0..traj.steps() {
            let (g0, g1) = (traj.graph_at(t).unwrap(), traj.graph_at(t + 1).unwrap());
            prop_assert!(g1.is_superset_of(g0));
            prop_assert!(is_friendly_transition(g0, g1, &traj.configs[t], &traj.configs[t + 1]).unwrap().friendly);
            prop_assert!(energy(&traj.configs[t + 1], Some(g1)).unwrap() <= energy(&traj.configs[t], Some(g0)).unwrap() + 1e-9);
        }
    }

    #[test]
    fn spectral_report_invariants((x, g) in with_graph(config(12, 2, 4.0))) {
        let r = spectral_report(&x, Some(&g)).unwrap();
        prop_assert!(r.energy >= r.active_energy && r.active_energy >= 0.0);
        prop_assert!(r.energy <= (x.n() * x.n() - x.n()) as f64 + 1e-9);
        if r.diameter >= 1 {
            prop_assert!(r.lambda <= r.gap_bound + 1e-9);
        }
    }

    #[test]
    fn nontrivial_implies_active_energy((x, g) in with_graph(config(10, 2, 3.0)), eps in 0.01f64..1.0) {
        if is_nontrivial(&x, Some(&g), eps).unwrap() {
            // the pair counts in both orders
            prop_assert!(active_energy(&x, Some(&g)).unwrap() >= 2.0 * eps * eps - 1e-12);
        }
    }

    #[test]
    fn partition_covers_agents(x in line(12, 4.0)) {
        let p = nd_partition(&x).unwrap();
        let mut all: Vec<usize> = p.l.iter().chain(&p.s).chain(&p.t).copied().collect();
        all.sort_unstable();
        prop_assert_eq!(all, (0..x.n()).collect::<Vec<_>>());
        prop_assert!(p.l.contains(&p.leftmost));
        let min = x.coords().iter().copied().fold(f64::INFINITY, f64::min);
        prop_assert_eq!(x.coords()[p.leftmost], min);
        prop_assert_eq!(p.leftmost, x.coords().iter().position(|&v| v == min).unwrap());
    }

    #[test]
    fn nd_lemmas_hold(x in line(10, 5.0), seed in any::<u64>(), pairwise in any::<bool>()) {
        let n = x.n();
        let eps = 1.0 / (8.0 * (n * n) as f64);
        let (model, mode) = if pairwise { (Model::NdPairwise, NoiseMode::PerPair) } else { (Model::Nd, NoiseMode::PerAgent) };
        let noise = NoiseSource::uniform(eps, mode, seed).unwrap();
        let traj = run(model, x, None, Some(&noise), &StopRule::steps(60), &RunOptions::default()).unwrap();
        let report = check_nd_lemmas(&traj, eps).unwrap();
        prop_assert!(report.passed(), "{:?}", report.violations);
        prop_assert_eq!(report.case_tags.len(), traj.steps());
        prop_assert!(report.max_s2_run <= n);
        let mut run_len = 0;
        for tag in &report.case_tags {
            run_len = if *tag == CaseTag::S2 { run_len + 1 } else { 0 };
            prop_assert!(run_len <= n);
        }
    }

    #[test]
    fn fast_kernel_agrees_with_runner((x, g) in with_graph(line(15, 8.0))) {
        let fast = social_convergence_time(x.coords(), &g, 1.0, 1e-6, 2000);
        let traj = run(Model::Social, x, Some(&GraphSchedule::fixed(g)), None, &StopRule::steps(2000).movement(1e-6), &RunOptions::default()).unwrap();
        let slow = match traj.stop { StopReason::Movement { t } => Some(t), _ => None };
        prop_assert_eq!(fast, slow);
    }
}

#[test]
fn sweep_row_count_identity() {
    let spec = SweepSpec::gnp(vec![4, 9, 16], vec![0.1, 0.5, 0.9, 1.0], 3, 77);
    let result = run_sweep(&spec, DEFAULT_BUDGET, false).unwrap();
    assert_eq!(result.rows.len(), 3 * 4 * 3);
}

#[test]
fn sweep_at_p_one_is_classical() {
    let spec = SweepSpec::gnp(vec![25], vec![1.0], 5, 3);
    let result = run_sweep(&spec, DEFAULT_BUDGET, false).unwrap();
    for row in &result.rows {
        let x0 = hkdyn_core::experiments::uniform_line(
            25,
            1.0,
            25.0,
            hkdyn_core::seed::mix(&[row.seed, 2]),
        )
        .unwrap();
        let traj = run(
            Model::Classical,
            x0,
            None,
            None,
            &StopRule::steps(100_000).movement(1e-6),
            &RunOptions::default(),
        )
        .unwrap();
        assert_eq!(
            traj.stop,
            StopReason::Movement {
                t: row.convergence_time
            }
        );
    }
}
