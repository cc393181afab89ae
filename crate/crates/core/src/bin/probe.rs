use offload_market::drl::*;
use offload_market::dda;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;

fn main() {
    let mut base = TrainConfig::default();
    base.agent.soft_update_rate = 0.02;
    base.agent.entropy_temperature = 0.1;
    base.agent.learning_rate = 3e-3;
    base.agent.updates_per_step = 2;
    let actions = ActionSpace::new(base.action_steps.clone()).unwrap();

    let eval_n = 40;
    let mut eval_markets = vec![];
    let mut oracle_sum = 0.0;
    let mut rng = ChaCha12Rng::seed_from_u64(999);
    for _ in 0..eval_n {
        let m = base.market.sample(&mut rng);
        let cap = m.round_bound(base.action_steps[0]);
        let (sw, _) = dda::enumerate_max_social_welfare(&m, &base.action_steps, cap).unwrap().unwrap();
        oracle_sum += sw;
        eval_markets.push(m);
    }
    let oracle = oracle_sum / eval_n as f64;
    println!("oracle={oracle:.3}");

    // Diffusion: episode count and width variants, 4 seeds in parallel.
    for (eps, hidden) in [(1500usize, vec![16usize, 16]), (900, vec![24, 24]), (1500, vec![24, 24])] {
        let t = std::time::Instant::now();
        let results: Vec<String> = std::thread::scope(|scope| {
            let handles: Vec<_> = (0..4u64)
                .map(|seed| {
                    let mut config = base.clone();
                    config.episodes = eps;
                    config.agent.policy_hidden = hidden.clone();
                    config.agent.critic_hidden = hidden.clone();
                    let markets = &eval_markets;
                    let actions = &actions;
                    scope.spawn(move || {
                        let (params, curve) = train(&config, seed).unwrap();
                        let last = &curve[curve.len() - 50..];
                        let r = last.iter().map(|e| e.reward).sum::<f64>() / 50.0;
                        let pol = Auctioneer::DiffusionGreedy(Box::new(params));
                        let mut rng = ChaCha12Rng::seed_from_u64(10_000 + seed);
                        let mut sw = 0.0;
                        let mut co = 0.0;
                        for m in markets {
                            let mut env = AuctionEnv::new(m.clone(), actions.clone(), config.weights).unwrap();
                            let e = run_episode(&mut env, &pol, &mut rng).unwrap();
                            sw += e.social_welfare;
                            co += e.exchange_cost;
                        }
                        format!("r={r:.2} sw={:.1}% co={:.3}", 100.0 * sw / (oracle * 40.0), co / 40.0)
                    })
                })
                .collect();
            handles.into_iter().map(|h| h.join().unwrap()).collect()
        });
        println!("diffusion eps={eps} hidden={hidden:?}: {results:?} ({:.0}s wall)", t.elapsed().as_secs_f64());
    }

    // PPO variants.
    for (lr, epu, ent) in [(3e-3, 8usize, 0.01), (1e-2, 4, 0.005), (1e-2, 8, 0.01)] {
        let mut results = vec![];
        for seed in 0..4u64 {
            let cfg = PpoConfig { learning_rate: lr, episodes_per_update: epu, entropy_coef: ent, ..Default::default() };
            let (_, curve) = train_ppo(900, &base.market, &base.action_steps, base.weights, cfg, seed).unwrap();
            let last = &curve[curve.len() - 50..];
            results.push(format!("{:.2}", last.iter().map(|e| e.reward).sum::<f64>() / 50.0));
        }
        println!("ppo lr={lr} epu={epu} ent={ent}: last50 r = {results:?}");
    }
}
