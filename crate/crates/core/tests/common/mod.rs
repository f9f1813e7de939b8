//! Reference computations shared by the numeric tests and the acceptance runner.
//! Each check returns a short description on success and the failure detail otherwise.

#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use txctl_core::dqn::{
    td_loss_and_gradients, AdamConfig, AdamState, DqnAgent, DqnHyperparams, MlpNetwork, Transition, WeightInit,
};
use txctl_core::env::{EnvConfig, Environment, Observation};

pub type Check = Result<String, String>;

/// Plain nested-loop forward pass over the flat parameter layout
/// (per layer: row-major `fan_in x fan_out` weights, then bias).
pub fn naive_forward(dims: &[usize], params: &[f64], input: &[f64]) -> Vec<f64> {
    let mut x = input.to_vec();
    let mut offset = 0;
    for l in 0..dims.len() - 1 {
        let (fan_in, fan_out) = (dims[l], dims[l + 1]);
        let w = &params[offset..offset + fan_in * fan_out];
        let b = &params[offset + fan_in * fan_out..offset + fan_in * fan_out + fan_out];
        offset += fan_in * fan_out + fan_out;
        let mut y = vec![0.0; fan_out];
        for j in 0..fan_out {
            let mut s = b[j];
            for i in 0..fan_in {
                s += x[i] * w[i * fan_out + j];
            }
            y[j] = if l + 2 < dims.len() { s.max(0.0) } else { s };
        }
        x = y;
    }
    x
}

fn naive_loss(dims: &[usize], params: &[f64], targets: &[f64], batch: &[Transition]) -> f64 {
    batch
        .iter()
        .zip(targets)
        .map(|(t, &y)| {
            let q = naive_forward(dims, params, &t.start_state);
            (q[t.action] - y).powi(2)
        })
        .sum::<f64>()
        / batch.len() as f64
}

fn random_transition(rng: &mut ChaCha8Rng, actions: usize) -> Transition {
    let mut state = || {
        [
            f64::from(rng.random_bool(0.5)),
            f64::from(rng.random_bool(0.5)),
            rng.random::<f64>(),
            rng.random::<f64>(),
        ]
    };
    let start_state = state();
    let end_state = state();
    Transition {
        start_state,
        action: rng.random_range(0..actions),
        reward: rng.random_range(-1.0..=1.0),
        end_state,
    }
}

/// Backprop against central differences of a naive loss on 20 random 4-8-8-3 nets.
pub fn gradient_check() -> Check {
    let dims = [4, 8, 8, 3];
    let gamma = 0.9;
    let h = 1e-5;
    let mut worst: f64 = 0.0;
    for net_seed in 0..20u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(1000 + net_seed);
        let mut online = MlpNetwork::new(&dims, WeightInit::GlorotUniform, &mut rng).map_err(|e| e.to_string())?;
        // Nonzero biases keep pre-activations off the ReLU kink even when a
        // whole hidden layer is inactive for some sample.
        for layer in online.layers_mut() {
            layer.bias.mapv_inplace(|_| rng.random_range(-0.5..0.5));
        }
        let batch: Vec<Transition> = (0..6).map(|_| random_transition(&mut rng, 3)).collect();

        // Targets come from a frozen copy so perturbing the online weights leaves them fixed.
        let frozen = online.clone();
        let targets: Vec<f64> = batch
            .iter()
            .map(|t| {
                let next = naive_forward(&dims, &frozen.flatten(), &t.end_state);
                t.reward + gamma * next.iter().copied().fold(f64::NEG_INFINITY, f64::max)
            })
            .collect();

        let (loss, grads) = td_loss_and_gradients(&online, &frozen, &batch, gamma);
        let analytic: Vec<f64> = grads
            .iter()
            .flat_map(|g| g.weights.iter().chain(g.bias.iter()).copied().collect::<Vec<_>>())
            .collect();
        let params = online.flatten();
        let reference = naive_loss(&dims, &params, &targets, &batch);
        if (loss - reference).abs() > 1e-12 {
            return Err(format!("net {net_seed}: loss {loss} vs reference {reference}"));
        }

        for (idx, &a) in analytic.iter().enumerate() {
            let mut plus = params.clone();
            plus[idx] += h;
            let mut minus = params.clone();
            minus[idx] -= h;
            let numeric =
                (naive_loss(&dims, &plus, &targets, &batch) - naive_loss(&dims, &minus, &targets, &batch)) / (2.0 * h);
            let rel = (a - numeric).abs() / a.abs().max(numeric.abs()).max(1e-6);
            worst = worst.max(rel);
        }
    }
    if worst < 1e-4 {
        Ok(format!("max relative error {worst:.2e}"))
    } else {
        Err(format!("max relative error {worst:.2e} >= 1e-4"))
    }
}

/// Two Adam steps on `x^2` from `x = 1`, learning rate 0.1. Expected values
/// come from exact rational arithmetic of the bias-corrected update.
pub fn adam_trace() -> Check {
    let cfg = AdamConfig {
        learning_rate: 0.1,
        ..AdamConfig::default()
    };
    let mut opt = AdamState::new(cfg, &[1]);
    let mut x = [1.0f64];
    let expected = [0.900_000_000_5, 0.800_412_228_691_792_1];
    for (i, want) in expected.into_iter().enumerate() {
        let g = [2.0 * x[0]];
        opt.step(&mut [&mut x[..]], &[&g[..]]);
        if (x[0] - want).abs() >= 1e-12 {
            return Err(format!("step {}: got {:.17}, want {want:.17}", i + 1, x[0]));
        }
    }
    Ok(format!("x2 = {:.15}", x[0]))
}

/// A memory holding one transition with reward 1 and zero discount drives
/// that action's Q-value to 1.
pub fn fixed_point() -> Check {
    let hyper = DqnHyperparams {
        gamma: 0.0,
        ..DqnHyperparams::default()
    };
    let batch = hyper.batch_size;
    let mut init = ChaCha8Rng::seed_from_u64(7);
    let mut agent = DqnAgent::new(hyper, 3, &mut init, ChaCha8Rng::seed_from_u64(8), ChaCha8Rng::seed_from_u64(9))
        .map_err(|e| e.to_string())?;
    let state = Observation {
        transmitted: 1.0,
        success: 1.0,
        interference: 0.0,
        buffer_level: 0.5,
    };
    let t = Transition {
        start_state: state.to_array(),
        action: 1,
        reward: 1.0,
        end_state: state.to_array(),
    };
    for _ in 0..batch {
        agent.push_transition(t);
    }
    for update in 1..=5000 {
        agent.train_step().map_err(|e| e.to_string())?;
        let q = agent.q_values(&state).map_err(|e| e.to_string())?[1];
        if (q - 1.0).abs() < 0.01 {
            return Ok(format!("|Q - 1| < 0.01 after {update} updates"));
        }
    }
    let q = agent.q_values(&state).map_err(|e| e.to_string())?[1];
    Err(format!("Q = {q} after 5000 updates"))
}

/// With epsilon = 1 every action is drawn equally often (within 3 sigma).
pub fn exploration_uniform() -> Check {
    let m = 3;
    let draws = 100_000;
    let mut init = ChaCha8Rng::seed_from_u64(1);
    let mut agent = DqnAgent::new(
        DqnHyperparams::default(),
        m,
        &mut init,
        ChaCha8Rng::seed_from_u64(2),
        ChaCha8Rng::seed_from_u64(3),
    )
    .map_err(|e| e.to_string())?;
    agent.set_epsilon(1.0);
    let obs = Observation::default();
    let mut counts = vec![0u32; m];
    for _ in 0..draws {
        counts[agent.select_action(&obs).map_err(|e| e.to_string())?] += 1;
    }
    let p = 1.0 / m as f64;
    let expected = draws as f64 * p;
    let sigma = (draws as f64 * p * (1.0 - p)).sqrt();
    for (a, &c) in counts.iter().enumerate() {
        if (f64::from(c) - expected).abs() > 3.0 * sigma {
            return Err(format!("action {a}: {c} of {draws} draws"));
        }
    }
    Ok(format!("counts {counts:?}"))
}

struct Reference {
    rewards: Vec<f64>,
    successes: Vec<bool>,
    network_successes: usize,
    interference: Vec<f64>,
}

/// Brute-force reading of the threshold rule for one flag vector.
fn reference(mask: u32, n: usize, k: usize) -> Reference {
    let transmits: Vec<bool> = (0..n).map(|a| mask >> a & 1 == 1).collect();
    let total = mask.count_ones() as usize;
    let ok = total <= k;
    let successes: Vec<bool> = transmits.iter().map(|&t| t && ok).collect();
    let rewards = transmits
        .iter()
        .map(|&t| match (t, ok) {
            (false, _) => 0.0,
            (true, true) => 1.0,
            (true, false) => -1.0,
        })
        .collect();
    let interference = transmits
        .iter()
        .map(|&t| if t || n == 1 { 0.0 } else { total as f64 / (n - 1) as f64 })
        .collect();
    Reference {
        rewards,
        successes,
        network_successes: if ok { total } else { 0 },
        interference,
    }
}

/// Every flag vector for n <= 6 and every k, against [`reference`].
pub fn environment_equivalence() -> Check {
    let mut cases = 0;
    for n in 1..=6usize {
        for k in 1..=n {
            for mask in 0..(1u32 << n) {
                let mut env = Environment::reset(EnvConfig::saturated(n, k)).map_err(|e| e.to_string())?;
                // Fill every buffer so no flag is coerced.
                env.step(&vec![false; n]).map_err(|e| e.to_string())?;
                let flags: Vec<bool> = (0..n).map(|a| mask >> a & 1 == 1).collect();
                let out = env.step(&flags).map_err(|e| e.to_string())?;
                let want = reference(mask, n, k);
                let interference: Vec<f64> = out.observations.iter().map(|o| o.interference).collect();
                if out.rewards != want.rewards
                    || out.success_flags != want.successes
                    || out.network_successes != want.network_successes
                    || interference != want.interference
                    || !out.coerced.is_empty()
                {
                    return Err(format!("mismatch at n={n} k={k} flags={mask:0n$b}"));
                }
                cases += 1;
            }
        }
    }
    Ok(format!("{cases} flag vectors"))
}
