use std::collections::BTreeMap;

use araps::oracle::{
    corpus, empirical_weights, enumerate_defender, AgentSolution, DiscreteGame,
};
use serde_json::Value;

const TOL: f64 = 1e-9;

fn expected() -> Value {
    serde_json::from_str(include_str!("fixtures/oracle_expected.json")).unwrap()
}

fn check_agent(name: &str, got: &AgentSolution, want: &Value) {
    let want = want.as_object().unwrap();
    assert_eq!(got.decisions.len(), want.len(), "{name}");
    for table in &got.decisions {
        let w = &want[table.decision.as_str()];
        let info: Vec<&str> = w["info"].as_array().unwrap().iter().map(|v| v.as_str().unwrap()).collect();
        let got_info: Vec<&str> = table.info.iter().map(|n| n.as_str()).collect();
        assert_eq!(got_info, info, "{name} {}", table.decision);
        let rows = w["rows"].as_array().unwrap();
        assert_eq!(table.rows.len(), rows.len());
        for (row, wr) in table.rows.iter().zip(rows) {
            let winfo: Vec<f64> = wr["info"].as_array().unwrap().iter().map(|v| v.as_f64().unwrap()).collect();
            assert_eq!(row.info, winfo);
            for (a, b) in row.expected.iter().zip(wr["expected"].as_array().unwrap()) {
                assert!((a - b.as_f64().unwrap()).abs() < TOL, "{name} {}: {a} vs {b}", table.decision);
            }
            assert_eq!(row.optimal, wr["optimal"].as_f64().unwrap(), "{name} {}", table.decision);
        }
    }
}

#[test]
fn corpus_matches_independent_solutions() {
    let expected = expected();
    for (name, game) in corpus() {
        let sol = enumerate_defender(&game).unwrap();
        let e = &expected[name];
        check_agent(name, &sol.defender, &e["defender"]);
        let attackers = e["attackers"].as_array().unwrap();
        assert_eq!(sol.attackers.len(), attackers.len());
        for (got, want) in sol.attackers.iter().zip(attackers) {
            check_agent(name, got, want);
        }
    }
}

fn game(name: &str) -> DiscreteGame {
    corpus().into_iter().find(|(n, _)| *n == name).unwrap().1
}

#[test]
fn single_stage_expected_utility_is_the_hand_sum() {
    // psi(d) = sum over a, theta of p(a) p(theta | d, a) u(d, theta)
    let g = game("single_2x2");
    let sol = enumerate_defender(&g).unwrap();
    let forecast = &sol.forecasts[&"A".into()];
    let theta = &g.defender.cpts[&"Theta".into()];
    let u = &g.defender.utility;
    let pos = |id: &str| u.parents.iter().position(|p| p.as_str() == id);
    let d_table = sol.defender.table("D").unwrap();
    for d in 0..2 {
        let mut psi = 0.0;
        for a in 0..2 {
            for t in 0..2 {
                let digits: Vec<usize> = theta
                    .parents
                    .iter()
                    .map(|p| if p.as_str() == "D" { d } else { a })
                    .collect();
                let mut ud = vec![0; u.parents.len()];
                if let Some(i) = pos("D") {
                    ud[i] = d;
                }
                if let Some(i) = pos("A") {
                    ud[i] = a;
                }
                if let Some(i) = pos("Theta") {
                    ud[i] = t;
                }
                psi += forecast.row([])[a] * theta.row(digits)[t] * u.value(ud);
            }
        }
        assert!((psi - d_table.rows[0].expected[d]).abs() < 1e-12);
    }
}

#[test]
fn decision_free_utility_picks_the_first_value() {
    let text = include_str!("../data/games/single_2x2.toml");
    let mut doc: toml::Value = toml::from_str(text).unwrap();
    for row in doc["defender"]["utility"].as_array_mut().unwrap() {
        row["value"] = toml::Value::Float(2.0);
    }
    let g = DiscreteGame::from_toml(&toml::to_string(&doc).unwrap()).unwrap();
    let sol = enumerate_defender(&g).unwrap();
    assert_eq!(sol.defender.table("D").unwrap().rows[0].optimal, 0.0);
}

#[test]
fn sampled_attack_frequency_matches_scenario_weights() {
    let g = game("single_2x2");
    let sol = enumerate_defender(&g).unwrap();
    let w = empirical_weights(&g, 10_000, 11);
    let mut p1 = 0.0;
    for (rules, wk) in sol.attackers.iter().zip(&w) {
        if rules.table("A").unwrap().rows[0].optimal == 1.0 {
            p1 += wk;
        }
    }
    assert!((p1 - 0.7).abs() < 0.02, "{p1}");
    let exact: BTreeMap<_, _> = sol.forecasts.iter().map(|(k, v)| (k.clone(), v.row([])[1])).collect();
    assert!((exact[&"A".into()] - 0.7).abs() < 1e-12);
}

#[test]
fn forgetting_is_rejected() {
    let text = include_str!("../data/games/two_stage.toml");
    let mut doc: toml::Value = toml::from_str(text).unwrap();
    for node in doc["nodes"].as_array_mut().unwrap() {
        if node["id"].as_str() == Some("D2") {
            node["parents"] = toml::Value::Array(vec![]);
        }
    }
    let res = DiscreteGame::from_toml(&toml::to_string(&doc).unwrap()).and_then(|g| enumerate_defender(&g));
    assert!(res.is_err());
}
