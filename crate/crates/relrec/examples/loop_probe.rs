use relrec::corpus::UserStore;
use relrec::eval::simulate::{SimWorld, SyntheticUserModel, RelCurve};
use relrec::eval::{run_regime_comparison, LoopConfig};
use relrec::ranking::GbdtParams;
use relrec::supplemental::BlendPolicy;
use relrec::synth::{generate, SynthConfig};
use std::time::Instant;

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let trap: f64 = args.get(1).and_then(|s| s.parse().ok()).unwrap_or(0.15);
    let save_slope: f64 = args.get(2).and_then(|s| s.parse().ok()).unwrap_or(0.25);
    let trees: usize = args.get(3).and_then(|s| s.parse().ok()).unwrap_or(20);
    let sessions: usize = args.get(4).and_then(|s| s.parse().ok()).unwrap_or(2500);
    let t0 = Instant::now();
    let mut ge_count = 0;
    let mut strict_count = 0;
    for seed in 1..=5u64 {
        let cfg = SynthConfig {
            clusters: 4,
            pins_per_cluster: 40,
            boards: 70,
            users: 12000,
            bootstrap_sessions: 0,
            trap_fraction: trap,
            seed,
            ..SynthConfig::default()
        };
        let mut user_model = SyntheticUserModel::default();
        user_model.save_given_closeup = RelCurve { base: 0.01, slope: save_slope };
        user_model.examination.insert("web".to_string(), (0..30).map(|k| (0.85 * 0.8f64.powi(k)).max(0.02)).collect());
        user_model.examination.insert("mobile".to_string(), (0..30).map(|k| (0.75 * 0.75f64.powi(k)).max(0.015)).collect());
        user_model.trust_amplitude = std::env::args().nth(5).and_then(|s| s.parse().ok()).unwrap_or(0.25);
        user_model.trust_decay = std::env::args().nth(6).and_then(|s| s.parse().ok()).unwrap_or(0.75);
        user_model.conformity = std::env::args().nth(9).and_then(|s| s.parse().ok()).unwrap_or(0.0);
        let data = generate(&cfg, &user_model).unwrap();
        let users = UserStore::build(&data.log, &data.pins, Some(&data.users));
        let world = SimWorld::build(
            data.pins.clone(), data.boards.clone(), users, None,
            user_model.clone(), BlendPolicy::uniform(), 60, seed,
        ).unwrap();
        let loop_cfg = LoopConfig {
            generations: 4,
            sessions_per_generation: sessions,
            unbiased_fraction: std::env::args().nth(10).and_then(|s| s.parse().ok()).unwrap_or(0.3),
            train_only_unbiased: true,
            top_k: 15,
            gbdt: GbdtParams { num_trees: trees, max_depth: std::env::args().nth(7).and_then(|s| s.parse().ok()).unwrap_or(3), shrinkage: 0.15, min_leaf_count: std::env::args().nth(8).and_then(|s| s.parse().ok()).unwrap_or(8), subsample: 1.0, positive_class_weight: None },
            seed,
        };
        let plan = data.session_plan(sessions, seed * 13 + 7);
        let stats = run_regime_comparison(&world, &plan, &loop_cfg).unwrap();
        let biased: Vec<_> = stats.iter().filter(|s| s.regime == "biased").collect();
        let unbiased: Vec<_> = stats.iter().filter(|s| s.regime == "unbiased").collect();
        let ranks: Vec<f64> = biased.iter().map(|s| s.mean_rank_shown).collect();
        let bprops: Vec<f64> = biased.iter().map(|s| s.save_propensity).collect();
        let uprops: Vec<f64> = unbiased.iter().map(|s| s.save_propensity).collect();
        let strict = ranks.windows(2).all(|w| w[1] < w[0]);
        let ge = uprops[3] >= bprops[3];
        if ge { ge_count += 1; }
        if strict { strict_count += 1; }
        println!("seed {seed}: ranks {:?} strict={strict} | b {:?} u {:?} ge={ge}",
            ranks.iter().map(|r| (r*100.0).round()/100.0).collect::<Vec<_>>(),
            bprops.iter().map(|r| (r*1000.0).round()/1000.0).collect::<Vec<_>>(),
            uprops.iter().map(|r| (r*1000.0).round()/1000.0).collect::<Vec<_>>());
    }
    println!("trap={trap} save_slope={save_slope} trees={trees} sessions={sessions}: strict {strict_count}/5, ge {ge_count}/5, {:?}", t0.elapsed());
}
