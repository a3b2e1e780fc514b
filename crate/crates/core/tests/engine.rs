mod common;

use std::collections::BTreeSet;

use araps::baid::{decision_path, examples, reduction_set, Agent, Baid, NodeId, ReductionSet};
use araps::engine::{
    aaps_reduce, daps_reduce, run_aaps, run_aaps_with, run_daps, ChainSettings, GridRun,
    ProposalKind, RandomProblem, ValueDataset,
};
use araps::rng::stream;
use common::*;
use proptest::prelude::*;
use rand::Rng;

#[test]
fn discrete_chain_reaches_its_stationary_joint() {
    let target = Matching::new(0.5);
    for seed in 1..=3 {
        let tv = matching_tv(&target, &settings_for(100_000, 1, seed));
        assert!(tv < 0.03, "seed {seed}: TV {tv}");
    }
}

#[test]
fn mode_is_the_expected_utility_maximizer() {
    let target = Matching::new(0.7);
    let psi = [0.7 * 1.2 + 0.3 * 1.9, 0.7 * 1.9 + 0.3 * 1.2];
    let out = run_daps(&target, &settings_for(20_000, 1, 4), false).unwrap();
    assert_eq!(out.mode.value, argmax(&psi) as f64);
}

#[test]
fn powering_keeps_the_argmax() {
    let ladder = Ladder::new([0.3, 0.6, 0.5]);
    let best = argmax(&ladder.expected()) as f64 / 2.0;
    assert_eq!(best, 0.5);
    let matching = Matching::new(0.7);
    for h in [1, 5, 20] {
        for seed in 1..=3 {
            let s = settings_for(if h == 1 { 100_000 } else { 20_000 }, h, seed);
            assert_eq!(run_daps(&ladder, &s, false).unwrap().mode.value, best, "h {h} seed {seed}");
            assert_eq!(run_daps(&matching, &s, false).unwrap().mode.value, 1.0, "h {h} seed {seed}");
        }
    }
}

#[test]
fn one_point_grid_matches_a_single_run() {
    let settings = settings_for(20_000, 5, 11);
    let run = GridRun::new("D".into(), vec![], vec![vec![]], settings.clone());
    let policy = daps_reduce(&run, |_| Ok(Matching::new(0.7))).unwrap();
    let single = run_daps(&Matching::new(0.7), &settings, false).unwrap();
    assert_eq!(policy.lookup(&[]), Some(single.mode.value));
    match policy.value_dataset {
        Some(ValueDataset::Scalar(v)) => {
            assert!(v.iter().all(|x| *x > 0.0));
            assert!((v[0] - 1.69).abs() < 0.03, "{v:?}");
        }
        other => panic!("{other:?}"),
    }
}

#[test]
fn attack_draws_match_enumerated_forecast() {
    let problem = Gamble { lo: 0.0, hi: 1.0 };
    let mut rng = stream(21, &[]);
    let exact = (0..10_000)
        .map(|k| Gamble::best(problem.draw(k, &mut rng)))
        .sum::<f64>()
        / 10_000.0;
    let settings = settings_for(2000, 20, 5);
    let run = GridRun::new("A".into(), vec![], vec![vec![]], settings);
    let forecast = aaps_reduce(&run, 500, 99, |_| Ok(Gamble { lo: 0.0, hi: 1.0 })).unwrap();
    let draws = forecast.draws_at(&[]).unwrap();
    let aps = draws.iter().sum::<f64>() / draws.len() as f64;
    assert!((aps - exact).abs() < 0.05, "APS {aps} vs enumeration {exact}");
    match forecast.value_dataset {
        Some(ValueDataset::PerDraw(v)) => assert!(v.iter().flatten().all(|x| *x > 0.0)),
        other => panic!("{other:?}"),
    }
}

#[test]
fn degenerate_attacker_is_deterministic() {
    let problem = Gamble { lo: 0.9, hi: 0.9 };
    let settings = settings_for(2000, 10, 8);
    let run = GridRun::new("A".into(), vec![], vec![vec![]], settings.clone());
    let forecast = aaps_reduce(&run, 20, 3, |_| Ok(Gamble { lo: 0.9, hi: 0.9 })).unwrap();
    assert!(forecast.draws_at(&[]).unwrap().iter().all(|a| *a == 1.0));
    let aaps = run_aaps_with(&problem, 0.9, &settings).unwrap();
    let daps = run_daps(&problem.realize(&0.9).unwrap(), &settings, false).unwrap();
    assert_eq!(aaps.mode, daps.mode);
}

#[test]
fn same_realization_gives_same_attack() {
    let problem = Gamble { lo: 0.0, hi: 1.0 };
    for k in 0..20 {
        let draw = problem.draw(k, &mut stream(5, &[k as u64]));
        if (draw - 1.0 / 3.0).abs() < 0.1 {
            continue;
        }
        let a = run_aaps(&problem, &settings_for(2000, 20, 1), k, &mut stream(5, &[k as u64])).unwrap();
        let b = run_aaps_with(&problem, draw, &settings_for(2000, 20, 2)).unwrap();
        assert_eq!(a.draw, draw);
        assert_eq!(a.attack, b.attack, "draw {draw}");
    }
}

#[test]
fn proposals_cover_the_interval() {
    struct Flat;
    impl araps::engine::AugmentedTarget for Flat {
        type Aux = ();
        fn domain(&self) -> &araps::baid::Domain {
            const D: araps::baid::Domain = araps::baid::Domain::Interval(0.0, 1.0);
            &D
        }
        fn sample_aux(&self, _: f64, _: &mut araps::rng::SimRng) {}
        fn utility(&self, _: f64, _: &()) -> f64 {
            2.0
        }
    }
    let s = settings_for(100_000, 1, 3).with_proposal(ProposalKind::Independent);
    let mut d = araps::engine::run_chain(&Flat, &s, false).unwrap().decisions;
    d.sort_by(f64::total_cmp);
    let n = d.len() as f64;
    let ks = d
        .iter()
        .enumerate()
        .map(|(i, x)| ((i as f64 + 1.0) / n - x).abs().max((x - i as f64 / n).abs()))
        .fold(0.0, f64::max);
    assert!(ks < 0.02, "KS {ks}");
}

#[test]
fn invalid_settings_are_rejected() {
    let mut s = ChainSettings::new(100, 0, 1);
    assert!(run_daps(&Matching::new(0.5), &s, false).is_err());
    s.augmentation = 1;
    s.burn_in = 100;
    assert!(run_daps(&Matching::new(0.5), &s, false).is_err());
    let run = GridRun::new("D".into(), vec![], vec![], ChainSettings::new(100, 1, 1));
    assert!(daps_reduce(&run, |_| Ok(Matching::new(0.5))).is_err());
}

/// Every reduction of `agent` in backward order.
fn all_sets(baid: &Baid, agent: Agent) -> Vec<ReductionSet> {
    let path = decision_path(baid, agent).nodes;
    let mut done = Vec::new();
    let mut sets = Vec::new();
    for d in path.iter().rev() {
        sets.push(reduction_set(baid, agent, d, &done).unwrap());
        done.push(d.clone());
    }
    sets
}

type Canonical = (
    String,
    BTreeSet<String>,
    BTreeSet<String>,
    BTreeSet<String>,
    BTreeSet<(String, String)>,
    BTreeSet<(String, Vec<String>)>,
);

fn canonical(set: &ReductionSet, back: &dyn Fn(&NodeId) -> String) -> Canonical {
    let names = |v: &[NodeId]| v.iter().map(back).collect::<BTreeSet<_>>();
    (
        back(&set.decision),
        names(&set.chance_nodes),
        names(&set.inherited_parents),
        set.requires_untreated_attacker_nodes.iter().map(back).collect(),
        set.inversions.iter().map(|(a, b)| (back(a), back(b))).collect(),
        set.ad_factors()
            .into_iter()
            .map(|f| {
                let mut ps: Vec<String> = f.parents.iter().map(back).collect();
                ps.sort();
                (back(&f.node), ps)
            })
            .collect(),
    )
}

fn diagrams() -> Vec<Baid> {
    vec![
        examples::single_stage(),
        examples::two_stage_simultaneous(),
        examples::example_one(),
        examples::example_two(),
        examples::disinformation(),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn reduction_sets_ignore_node_names(which in 0usize..5, salt in any::<u64>()) {
        let g = &diagrams()[which];
        let prefix = |id: &NodeId| {
            let mut r = stream(salt, &[araps::rng::tag(id.as_str())]);
            format!("n{:03}_{}", r.random_range(0..1000u32), id.as_str())
        };
        let renamed = g.relabeled(|id| NodeId::new(prefix(id))).unwrap();
        let back = |id: &NodeId| id.as_str().split_once('_').unwrap().1.to_string();
        let same = |id: &NodeId| id.as_str().to_string();
        for agent in [Agent::Defender, Agent::Attacker] {
            let a: Vec<_> = all_sets(g, agent).iter().map(|s| canonical(s, &same)).collect();
            let b: Vec<_> = all_sets(&renamed, agent).iter().map(|s| canonical(s, &back)).collect();
            prop_assert_eq!(a, b);
        }
    }

    #[test]
    fn availability_is_monotone(which in 0usize..5, bits in any::<u8>(), extra in any::<u8>()) {
        let g = &diagrams()[which];
        let attackers: Vec<NodeId> = decision_path(g, Agent::Attacker).nodes;
        let pick = |mask: u8| -> BTreeSet<NodeId> {
            attackers.iter().enumerate().filter(|(i, _)| mask >> i & 1 == 1).map(|(_, n)| n.clone()).collect()
        };
        let small = pick(bits);
        let large = pick(bits | extra);
        for set in all_sets(g, Agent::Defender) {
            if set.inputs_available(&small) {
                prop_assert!(set.inputs_available(&large));
            }
        }
    }
}
