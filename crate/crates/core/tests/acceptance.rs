//! Acceptance criteria. Runs as a plain binary (no libtest harness) so the
//! criteria execute one after another, timings are not disturbed by parallel
//! tests, and each prints exactly one `PASS`/`FAIL` line. The process exits
//! 0 either way; read the lines.

use std::collections::{BTreeSet, VecDeque};
use std::time::{Duration, Instant};

use lpg_core::domain::{
    enumerate_eval_pairs, enumerate_objects, Colour, Dataset, Object, PreferenceRecord, Shape, TrainingPipeline,
    TrainingStage, N_FEATURES,
};
use lpg_core::elo::{elo_holdout_validation, elo_predict, fit_elo_records, Competitor, ELO_SCALE};
use lpg_core::eval::{brier_score, compute_metrics, kl_divergence, total_variation, write_json, write_metrics_csv, MetricsMode, MetricsRow};
use lpg_core::fit::{
    fit_hyperparameters, hyper_gradient, lower_bound_per_feature, lower_bound_per_goal, modelling_loss,
    predict_dataset, simulate_variant, FitConfig, GradientMode, ModelVariant,
};
use lpg_core::lpg::reference::reference_hyperparameters;
use lpg_core::lpg::{
    equilibrium_projection, predict_preferences, sigmoid, similarity_metric, simulate_pipeline, stage_objective,
    LpgHyperparameters, SimulationSettings, Structure,
};
use lpg_core::maze::{
    generate_agents, generate_maze, Action, DataGenConfig, EpisodeState, MazeConfig, MazeGrid, Outcome, Pos, GRID_SIZE,
    HORIZON,
};
use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

// Pinned tolerances and budgets.
const STAGE_GRADIENT_REL_TOL: f64 = 1e-5;
const STAGE_GRADIENT_BUDGET: Duration = Duration::from_secs(5);
const PROJECTION_TOL: f64 = 1e-3;
const PROJECTION_BUDGET: Duration = Duration::from_secs(10);
const EQUILIBRIUM_TOL: f64 = 1e-3;
const SIMILARITY_TOL: f64 = 0.01;
const OUTER_GRADIENT_REL_TOL: f64 = 1e-3;
const OUTER_GRADIENT_BUDGET: Duration = Duration::from_secs(30);
const RECOVERY_KL_GAP: f64 = 0.01;
const RECOVERY_BUDGET: Duration = Duration::from_secs(60);
const RECOVERY_DIRECTIONAL_MIN: f64 = 0.9;
const RECOVERY_EPOCHS: usize = 50;
const ELO_DIRECTIONAL_MIN: f64 = 0.95;
const ELO_ADDITIVITY_TOL: f64 = 1e-9;
const END_TO_END_BUDGET: Duration = Duration::from_secs(600);
const FINAL_GOAL_PREFERENCE_MIN: f64 = 0.5;

/// Reference `SSᵀ` diagonal, frozen.
const FROZEN_SIMILARITY_DIAGONAL: [f64; N_FEATURES] =
    [1.585, 4.838, 2.750, 4.516, 2.767, 8.882, 3.500, 1.449, 6.115, 6.141];

const RED_CROSS: Object = Object::new(Colour::Red, Shape::Cross);
const BLACK_PLUS: Object = Object::new(Colour::Black, Shape::Plus);
const BLUE_DIAMOND: Object = Object::new(Colour::Blue, Shape::Diamond);

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: String) -> Verdict {
    Verdict { pass, detail }
}

fn rel_err(a: &[f64], b: &[f64]) -> f64 {
    let d: f64 = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
    let n: f64 = b.iter().map(|y| y * y).sum::<f64>().sqrt();
    d / n.max(1e-12)
}

fn training_goals() -> Vec<Object> {
    enumerate_objects().into_iter().filter(|o| o.is_training_goal()).collect()
}

/// Reference fit with every saliency entry scaled by U(0.9, 1.1),
/// `τ ∈ [0.6, 0.8]` and `w0 ∈ [-0.5, 0]`.
fn fitted_scale(rng: &mut ChaCha8Rng) -> LpgHyperparameters {
    let base = reference_hyperparameters();
    let s = DMatrix::from_fn(N_FEATURES, N_FEATURES, |i, j| base.saliency()[(i, j)] * rng.gen_range(0.9..1.1));
    let tau: f64 = rng.gen_range(0.6..0.8);
    LpgHyperparameters::new(Structure::Full, s, tau.ln(), rng.gen_range(-0.5..0.0)).unwrap()
}

fn sample_counts(rng: &mut ChaCha8Rng, p: [f64; 3], episodes: u32) -> [u32; 3] {
    let mut c = [0u32; 3];
    for _ in 0..episodes {
        let u: f64 = rng.gen();
        c[if u < p[0] {
            0
        } else if u < p[0] + p[1] {
            1
        } else {
            2
        }] += 1;
    }
    c
}

/// Records sampled from a model: random one- and two-stage pipelines over
/// training goals, `per_pipeline` random pairs each.
fn synthetic_dataset(
    hp: &LpgHyperparameters,
    n_pipelines: usize,
    per_pipeline: usize,
    episodes: u32,
    seed: u64,
    prefix: &str,
) -> Dataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let goals = training_goals();
    let pairs = enumerate_eval_pairs();
    let mut pipelines = Vec::new();
    let mut records = Vec::new();
    for i in 0..n_pipelines {
        let g: Vec<Object> = goals.choose_multiple(&mut rng, 2).copied().collect();
        let stages = if i % 2 == 0 {
            vec![TrainingStage::goal_only(g[0])]
        } else {
            vec![TrainingStage::goal_only(g[0]), TrainingStage::goal_only(g[1])]
        };
        let p = TrainingPipeline::new(format!("{prefix}{i}"), stages).unwrap();
        let w = simulate_pipeline(hp, &p, &SimulationSettings::default()).unwrap();
        for &(a, b) in pairs.choose_multiple(&mut rng, per_pipeline) {
            let d = predict_preferences(hp, &w.0, a, b);
            let c = sample_counts(&mut rng, d.as_array(), episodes);
            records.push(PreferenceRecord::new(p.id(), a, b, c, episodes).unwrap());
        }
        pipelines.push(p);
    }
    Dataset::new(pipelines, records).unwrap()
}

fn stage_gradient_oracle() -> Verdict {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let objs = enumerate_objects();
    let h = 1e-5;
    let mut worst: f64 = 0.0;
    for k in 0..100 {
        let s = DMatrix::from_fn(N_FEATURES, N_FEATURES, |i, j| match i.cmp(&j) {
            std::cmp::Ordering::Equal => rng.gen_range(0.5..2.0),
            std::cmp::Ordering::Less => rng.gen_range(-1.0..1.0),
            std::cmp::Ordering::Greater => 0.0,
        });
        let tau: f64 = rng.gen_range(0.3..1.5);
        let hp = LpgHyperparameters::new(Structure::Full, s, tau.ln(), 0.0).unwrap();
        let w = DVector::from_fn(N_FEATURES, |_, _| rng.gen_range(-1.0..1.0));
        let pick: Vec<Object> = objs.choose_multiple(&mut rng, 2).copied().collect();
        let stage = TrainingStage::new(pick[0], (k % 2 == 1).then_some(pick[1])).unwrap();
        let analytic = stage_objective(&hp, &w, &stage).grad_w;
        let numeric: Vec<f64> = (0..N_FEATURES)
            .map(|i| {
                let (mut up, mut dn) = (w.clone(), w.clone());
                up[i] += h;
                dn[i] -= h;
                (stage_objective(&hp, &up, &stage).j - stage_objective(&hp, &dn, &stage).j) / (2.0 * h)
            })
            .collect();
        worst = worst.max(rel_err(analytic.as_slice(), &numeric));
    }
    let t = start.elapsed();
    verdict(
        worst < STAGE_GRADIENT_REL_TOL && t < STAGE_GRADIENT_BUDGET,
        format!("100 draws, max relative error {worst:.2e} (< {STAGE_GRADIENT_REL_TOL:.0e}), {:.3}s", t.as_secs_f64()),
    )
}

fn projection_oracle() -> Verdict {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let objs = enumerate_objects();
    let mut worst: f64 = 0.0;
    let mut misses = Vec::new();
    for k in 0..100 {
        let hp = fitted_scale(&mut rng);
        let n_stages = 1 + k % 2;
        let goals: Vec<Object> = objs.choose_multiple(&mut rng, n_stages).copied().collect();
        let p = TrainingPipeline::new("p", goals.iter().map(|&g| TrainingStage::goal_only(g)).collect()).unwrap();
        let sim = simulate_pipeline(&hp, &p, &SimulationSettings::default()).unwrap();
        let mut w = hp.initial_latent();
        for &g in &goals {
            w = equilibrium_projection(&hp, &w, g).unwrap().0;
        }
        let gap = (&sim.0 - &w).amax();
        if gap >= PROJECTION_TOL {
            misses.push((k, hp.clone(), p.clone(), w.clone(), gap));
        }
        worst = worst.max(gap);
    }
    let t = start.elapsed();
    // slow convergence or divergence? rerun misses with ten times the steps
    let diagnosis: Vec<String> = misses
        .iter()
        .map(|(k, hp, p, w, gap)| {
            let long = SimulationSettings {
                n_integration_steps: 10 * SimulationSettings::default().n_integration_steps,
                ..Default::default()
            };
            let later = (&simulate_pipeline(hp, p, &long).unwrap().0 - w).amax();
            format!("case {k} (tau {:.3}) gap {gap:.2e}, {later:.2e} after 10x steps", hp.tau())
        })
        .collect();
    verdict(
        worst < PROJECTION_TOL && t < PROJECTION_BUDGET,
        format!(
            "100 pipelines, max component gap {worst:.2e} (< {PROJECTION_TOL:.0e}), {} over tolerance{}{}, {:.3}s",
            misses.len(),
            if diagnosis.is_empty() { "" } else { ": " },
            diagnosis.join("; "),
            t.as_secs_f64()
        ),
    )
}

fn equilibrium_identity() -> Verdict {
    let hp = LpgHyperparameters::initial(Structure::Full, N_FEATURES);
    let target = sigmoid(1.0);
    let mut worst: f64 = 0.0;
    for g in enumerate_objects() {
        let p = TrainingPipeline::new("eq", vec![TrainingStage::goal_only(g)]).unwrap();
        let w = simulate_pipeline(&hp, &p, &SimulationSettings::default()).unwrap();
        worst = worst.max((stage_objective(&hp, &w.0, &p.stages()[0]).pi_goal - target).abs());
    }
    verdict(
        worst < EQUILIBRIUM_TOL,
        format!("24 goals, max |π_goal − σ(1) = {target:.4}| = {worst:.2e} (< {EQUILIBRIUM_TOL:.0e})"),
    )
}

fn similarity_cross_check() -> Verdict {
    let m = similarity_metric(&reference_hyperparameters());
    let worst = (0..N_FEATURES)
        .map(|i| (m[(i, i)] - FROZEN_SIMILARITY_DIAGONAL[i]).abs())
        .fold(0.0, f64::max);
    verdict(
        worst < SIMILARITY_TOL,
        format!("black {:.3}, cross {:.3}; max diagonal gap {worst:.4} (< {SIMILARITY_TOL})", m[(0, 0)], m[(5, 5)]),
    )
}

fn outer_gradient_oracle() -> Verdict {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let p1 = TrainingPipeline::new("single", vec![TrainingStage::new(RED_CROSS, Some(BLUE_DIAMOND)).unwrap()]).unwrap();
    let p2 = TrainingPipeline::new(
        "two",
        vec![TrainingStage::goal_only(BLACK_PLUS), TrainingStage::goal_only(RED_CROSS)],
    )
    .unwrap();
    let pairs = enumerate_eval_pairs();
    let records: Vec<_> = pairs
        .choose_multiple(&mut rng, 5)
        .enumerate()
        .map(|(k, &(a, b))| {
            let ca = rng.gen_range(0..=100u32);
            let cb = rng.gen_range(0..=100 - ca);
            PreferenceRecord::new(if k % 2 == 0 { "single" } else { "two" }, a, b, [ca, cb, 100 - ca - cb], 100).unwrap()
        })
        .collect();
    let d = Dataset::new([p1, p2], records).unwrap();
    let settings = SimulationSettings::default();
    let h = 1e-5;
    let mut worst: f64 = 0.0;
    for v in ModelVariant::ALL {
        let hp = {
            let base = v.initial_hyperparameters(N_FEATURES);
            let p: Vec<f64> = base.to_params().iter().map(|x| x * rng.gen_range(0.8..1.2) + rng.gen_range(-0.05..0.05)).collect();
            base.with_params(&p).with_log_tau(-0.3).with_w0(-0.2)
        };
        let adjoint = hyper_gradient(&hp, v, &d, &settings, GradientMode::Adjoint).unwrap();
        let params = hp.to_params();
        let numeric: Vec<f64> = (0..params.len())
            .map(|i| {
                let (mut up, mut dn) = (params.clone(), params.clone());
                up[i] += h;
                dn[i] -= h;
                let lu = modelling_loss(&hp.with_params(&up), v, &d, &settings).unwrap();
                let ld = modelling_loss(&hp.with_params(&dn), v, &d, &settings).unwrap();
                (lu - ld) / (2.0 * h)
            })
            .collect();
        worst = worst.max(rel_err(&adjoint.gradient, &numeric));
    }
    let t = start.elapsed();
    verdict(
        worst < OUTER_GRADIENT_REL_TOL && t < OUTER_GRADIENT_BUDGET,
        format!(
            "5 records, 5 variants, max relative error {worst:.2e} (< {OUTER_GRADIENT_REL_TOL:.0e}), {:.2}s",
            t.as_secs_f64()
        ),
    )
}

fn synthetic_recovery() -> Verdict {
    let generator = reference_hyperparameters();
    let train = synthetic_dataset(&generator, 20, 10, 1000, 21, "train");
    let settings = SimulationSettings::default();
    let generator_loss = modelling_loss(&generator, ModelVariant::Full, &train, &settings).unwrap();
    let config = FitConfig {
        epochs: RECOVERY_EPOCHS,
        rng_seed: 5,
        ..Default::default()
    };
    let start = Instant::now();
    let fit = fit_hyperparameters(&train, ModelVariant::Full, &config).unwrap();
    let t = start.elapsed();
    let gap = fit.train_loss - generator_loss;

    // fresh pipelines and pairs
    let held = synthetic_dataset(&generator, 10, 30, 1000, 22, "held");
    let preds = predict_dataset(&fit.hyperparameters, ModelVariant::Full, &held, &settings).unwrap();
    let obs: Vec<_> = held.records().iter().map(|r| r.distribution()).collect();
    let m = compute_metrics(&preds, &obs, MetricsMode::TwoWay).unwrap();
    verdict(
        gap < RECOVERY_KL_GAP && t < RECOVERY_BUDGET && m.directional_accuracy >= RECOVERY_DIRECTIONAL_MIN,
        format!(
            "fit {:.5} vs generator {generator_loss:.5} (gap {gap:.5} < {RECOVERY_KL_GAP}) in {:.2}s; held-out two-way dir acc {:.4} over {} pairs (>= {RECOVERY_DIRECTIONAL_MIN})",
            fit.train_loss,
            t.as_secs_f64(),
            m.directional_accuracy,
            m.n_directional
        ),
    )
}

fn variant_invariants() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    let goals = training_goals();
    let settings = SimulationSettings::default();
    let mut memoryless_gap: f64 = 0.0;
    let mut simultaneous_gap: f64 = 0.0;
    for _ in 0..20 {
        let hp = fitted_scale(&mut rng);
        let g: Vec<Object> = goals.choose_multiple(&mut rng, 3).copied().collect();
        let mk = |a: Object, b: Object| {
            TrainingPipeline::new("p", vec![TrainingStage::goal_only(a), TrainingStage::goal_only(b)]).unwrap()
        };
        let a = simulate_variant(&hp, &mk(g[0], g[1]), ModelVariant::Memoryless, &settings).unwrap();
        let b = simulate_variant(&hp, &mk(g[2], g[1]), ModelVariant::Memoryless, &settings).unwrap();
        memoryless_gap = memoryless_gap.max((&a.0 - &b.0).amax());
        let a = simulate_variant(&hp, &mk(g[0], g[1]), ModelVariant::Simultaneous, &settings).unwrap();
        let b = simulate_variant(&hp, &mk(g[1], g[0]), ModelVariant::Simultaneous, &settings).unwrap();
        simultaneous_gap = simultaneous_gap.max((&a.0 - &b.0).amax());
    }

    // nesting on three datasets: two model-generated, one with arbitrary counts
    let mut datasets = vec![
        synthetic_dataset(&reference_hyperparameters(), 12, 20, 500, 32, "r"),
        synthetic_dataset(&fitted_scale(&mut rng), 12, 20, 500, 33, "s"),
    ];
    {
        let pipelines: Vec<_> = (0..6)
            .map(|i| {
                TrainingPipeline::new(format!("x{i}"), vec![TrainingStage::goal_only(goals[i])]).unwrap()
            })
            .collect();
        let pairs = enumerate_eval_pairs();
        let mut records = Vec::new();
        for p in &pipelines {
            let chosen: Vec<_> = pairs.choose_multiple(&mut rng, 20).copied().collect();
            for (a, b) in chosen {
                let ca = rng.gen_range(0..=50u32);
                let cb = rng.gen_range(0..=50 - ca);
                records.push(PreferenceRecord::new(p.id(), a, b, [ca, cb, 50 - ca - cb], 50).unwrap());
            }
        }
        datasets.push(Dataset::new(pipelines, records).unwrap());
    }
    let config = FitConfig {
        epochs: RECOVERY_EPOCHS,
        ..Default::default()
    };
    let mut nesting = Vec::new();
    for d in &datasets {
        let goal = lower_bound_per_goal(d).unwrap();
        let feature = lower_bound_per_feature(d).unwrap();
        let full = fit_hyperparameters(d, ModelVariant::Full, &config).unwrap().train_loss;
        nesting.push((goal, feature, full));
    }
    let nested = nesting.iter().all(|&(g, f, l)| g <= f + 1e-9 && f <= l + 1e-9);
    let listing: Vec<String> = nesting.iter().map(|(g, f, l)| format!("{g:.4}<={f:.4}<={l:.4}")).collect();
    verdict(
        memoryless_gap == 0.0 && simultaneous_gap < 1e-12 && nested,
        format!(
            "memoryless substitution gap {memoryless_gap:.1e}, simultaneous permutation gap {simultaneous_gap:.1e}; nesting {}",
            listing.join(", ")
        ),
    )
}

fn elo_suite() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(41);
    let objs = enumerate_objects();
    let pairs = enumerate_eval_pairs();
    let (mut correct, mut counted) = (0.0, 0usize);
    let mut worst_agent: f64 = 1.0;
    let mut additivity: f64 = 0.0;
    let mut anchored = true;
    for agent in 0..5 {
        let truth: Vec<f64> = objs.iter().map(|_| rng.gen_range(-300.0..300.0)).collect();
        let id = format!("agent{agent}");
        let records: Vec<_> = pairs
            .iter()
            .map(|&(a, b)| {
                let [pa, pb, pn] = [truth[a.index()], truth[b.index()], 0.0].map(|s| (s / ELO_SCALE).exp());
                let z = pa + pb + pn;
                let c = sample_counts(&mut rng, [pa / z, pb / z, pn / z], 10_000);
                PreferenceRecord::new(id.clone(), a, b, c, 10_000).unwrap()
            })
            .collect();
        let m = elo_holdout_validation(&records, 4, agent, MetricsMode::TwoWay).unwrap();
        correct += m.directional_accuracy * m.n_directional as f64;
        counted += m.n_directional;
        worst_agent = worst_agent.min(m.directional_accuracy);

        let table = fit_elo_records(&records).unwrap();
        anchored &= table.no_goal_score == 0.0;
        let comps: Vec<Competitor> = objs.iter().map(|&o| Competitor::Object(o)).chain([Competitor::NoGoal]).collect();
        let logit = |p: f64| (p / (1.0 - p)).ln();
        for _ in 0..200 {
            let t: Vec<Competitor> = comps.choose_multiple(&mut rng, 3).copied().collect();
            let ab = logit(elo_predict(&table, t[0], t[1]).unwrap());
            let bc = logit(elo_predict(&table, t[1], t[2]).unwrap());
            let ac = logit(elo_predict(&table, t[0], t[2]).unwrap());
            additivity = additivity.max((ab + bc - ac).abs());
        }
    }
    let pooled = correct / counted as f64;
    verdict(
        pooled > ELO_DIRECTIONAL_MIN && additivity < ELO_ADDITIVITY_TOL && anchored,
        format!(
            "4-fold holdout dir acc {pooled:.4} pooled over 5 agents (> {ELO_DIRECTIONAL_MIN}; worst agent {worst_agent:.4}); logit additivity residual {additivity:.1e}; no-goal anchored at 0: {anchored}"
        ),
    )
}

/// Cells reachable from the agent through open cells.
fn flood_fill(grid: &MazeGrid) -> BTreeSet<(usize, usize)> {
    let mut seen = BTreeSet::from([(grid.agent.row, grid.agent.col)]);
    let mut queue = VecDeque::from([grid.agent]);
    while let Some(p) = queue.pop_front() {
        for q in p.neighbours() {
            if !grid.walls[q.row][q.col] && seen.insert((q.row, q.col)) {
                queue.push_back(q);
            }
        }
    }
    seen
}

/// Shortest action sequence from the agent to `target`.
fn shortest_path(grid: &MazeGrid, target: Pos) -> Vec<Action> {
    let mut prev = vec![vec![None; GRID_SIZE]; GRID_SIZE];
    let mut queue = VecDeque::from([grid.agent]);
    let mut seen = BTreeSet::from([(grid.agent.row, grid.agent.col)]);
    while let Some(p) = queue.pop_front() {
        if p == target {
            break;
        }
        for a in Action::ALL {
            if let Some(q) = a.apply(p) {
                // other objects would end the episode early
                let blocked = grid.walls[q.row][q.col] || (q != target && grid.object_at(q).is_some());
                if !blocked && seen.insert((q.row, q.col)) {
                    prev[q.row][q.col] = Some((p, a));
                    queue.push_back(q);
                }
            }
        }
    }
    let mut path = Vec::new();
    let mut at = target;
    while let Some((p, a)) = prev[at.row][at.col] {
        path.push(a);
        at = p;
    }
    path.reverse();
    path
}

fn environment_suite() -> Verdict {
    let config = MazeConfig::default();
    let objs = enumerate_objects();
    let mut connected = 0;
    let mut identity_worst: f64 = 0.0;
    let mut identity_cases = 0;
    for seed in 0..1000u64 {
        let pair = [objs[seed as usize % 24], objs[(seed as usize * 7 + 3) % 24]];
        let pair = if pair[0] == pair[1] { vec![pair[0]] } else { pair.to_vec() };
        let grid = generate_maze(seed, &pair, Some(pair[0]), &config).unwrap();
        let open: BTreeSet<(usize, usize)> = (0..GRID_SIZE)
            .flat_map(|r| (0..GRID_SIZE).map(move |c| (r, c)))
            .filter(|&(r, c)| !grid.walls[r][c])
            .collect();
        if flood_fill(&grid) == open {
            connected += 1;
        }
        let path = shortest_path(&grid, grid.objects[0].pos);
        if !path.is_empty() {
            let mut state = EpisodeState::new(grid);
            let ret: f64 = path.iter().map(|&a| state.step(a).unwrap()).sum();
            let t = path.len() as f64;
            if state.outcome == Outcome::Reached(pair[0]) {
                identity_worst = identity_worst.max((ret - (1.0 - 0.1 * (t - 1.0))).abs());
                identity_cases += 1;
            } else {
                identity_worst = f64::INFINITY;
            }
        }
    }

    // never touch an object: the episode must stop at exactly the horizon
    let mut horizon_ok = true;
    for seed in 0..50u64 {
        let grid = generate_maze(seed, &[RED_CROSS], Some(RED_CROSS), &config).unwrap();
        let mut state = EpisodeState::new(grid);
        let mut steps = 0;
        let mut ret = 0.0;
        while !state.is_terminated() {
            let a = Action::ALL
                .into_iter()
                .find(|&a| state.grid.object_at(state.target(a)).is_none())
                .unwrap();
            ret += state.step(a).unwrap();
            steps += 1;
        }
        horizon_ok &= steps == HORIZON
            && state.outcome == Outcome::Timeout
            && (ret + 0.1 * HORIZON as f64).abs() < 1e-9
            && state.step(Action::Up).is_err();
    }
    verdict(
        connected == 1000 && identity_cases > 900 && identity_worst < 1e-12 && horizon_ok,
        format!(
            "{connected}/1000 mazes connected by flood fill; return identity on {identity_cases} scripted episodes (max error {identity_worst:.1e}); horizon stop at step {HORIZON}: {horizon_ok}"
        ),
    )
}

fn end_to_end() -> Verdict {
    let start = Instant::now();
    let out = tempfile::tempdir().unwrap();
    let pipelines = vec![
        TrainingPipeline::new("single", vec![TrainingStage::goal_only(RED_CROSS)]).unwrap(),
        TrainingPipeline::new(
            "two",
            vec![TrainingStage::goal_only(BLACK_PLUS), TrainingStage::goal_only(BLUE_DIAMOND)],
        )
        .unwrap(),
    ];
    let config = DataGenConfig::default();
    let agents = generate_agents(&pipelines, &config, 2024).unwrap();
    let records: Vec<_> = agents.iter().flat_map(|a| a.records.iter().cloned()).collect();
    let n_records = records.len();
    let dataset = Dataset::new(pipelines.clone(), records).unwrap();
    lpg_core::domain::save_dataset(&dataset, out.path().join("dataset.jsonl")).unwrap();

    let mut rows = Vec::new();
    for (p, recs) in dataset.by_pipeline() {
        let table = fit_elo_records(recs.iter().copied()).unwrap();
        table.write_csv(std::fs::File::create(out.path().join(format!("elo_{}.csv", p.id()))).unwrap()).unwrap();
        lpg_core::elo::write_marginalised_csv(
            &table,
            std::fs::File::create(out.path().join(format!("elo_{}_marginal.csv", p.id()))).unwrap(),
        )
        .unwrap();
        let owned: Vec<_> = recs.iter().map(|r| (*r).clone()).collect();
        let m = elo_holdout_validation(&owned, 4, 0, MetricsMode::TwoWay).unwrap();
        rows.push(MetricsRow::new("elo", format!("holdout_{}", p.id()), &m));
    }
    let fit = fit_hyperparameters(&dataset, ModelVariant::Full, &FitConfig::default()).unwrap();
    write_json(&out.path().join("hyperparameters.json"), &fit.hyperparameters).unwrap();
    write_json(&out.path().join("fit_report.json"), &fit).unwrap();
    let preds = predict_dataset(&fit.hyperparameters, ModelVariant::Full, &dataset, &fit_settings()).unwrap();
    let obs: Vec<_> = dataset.records().iter().map(|r| r.distribution()).collect();
    for mode in [MetricsMode::ThreeWay, MetricsMode::TwoWay] {
        rows.push(MetricsRow::new("full", "train", &compute_metrics(&preds, &obs, mode).unwrap()));
    }
    write_metrics_csv(&out.path().join("metrics.csv"), &rows).unwrap();
    let t = start.elapsed();

    let reports = ["dataset.jsonl", "hyperparameters.json", "fit_report.json", "metrics.csv", "elo_single.csv", "elo_two_marginal.csv"];
    let emitted = reports.iter().all(|f| out.path().join(f).exists());

    // final goal against objects the agent never saw
    let mut shares = Vec::new();
    for p in &pipelines {
        let goal = p.final_stage().goal;
        let seen = p.seen_objects();
        let (mut wins, mut total) = (0u32, 0u32);
        for r in dataset.records_for(p.id()) {
            let other = if r.object_a() == goal { r.object_b() } else if r.object_b() == goal { r.object_a() } else { continue };
            if seen.contains(&other) {
                continue;
            }
            wins += r.count_for(goal).unwrap();
            total += r.episodes();
        }
        shares.push(wins as f64 / total as f64);
    }
    let share_text: Vec<String> = pipelines.iter().zip(&shares).map(|(p, s)| format!("{} {s:.3}", p.id())).collect();
    verdict(
        n_records == 2 * 276 && emitted && t < END_TO_END_BUDGET && shares.iter().all(|&s| s > FINAL_GOAL_PREFERENCE_MIN),
        format!(
            "{n_records} records x 100 episodes, Elo + full fit (loss {:.4}) + reports in {:.1}s; final-goal share vs unseen objects: {} (> {FINAL_GOAL_PREFERENCE_MIN})",
            fit.train_loss,
            t.as_secs_f64(),
            share_text.join(", ")
        ),
    )
}

fn fit_settings() -> SimulationSettings {
    FitConfig::default().simulation()
}

fn metrics_identities() -> Verdict {
    let p = [0.5, 0.3, 0.2];
    let zero = kl_divergence(&p, &p) == 0.0 && total_variation(&p, &p) == 0.0 && brier_score(&p, &p) == 0.0;
    let u = [1.0 / 3.0; 3];
    let tv = total_variation(&u, &[1.0, 0.0, 0.0]);
    let bs = brier_score(&u, &[1.0, 0.0, 0.0]);
    let arithmetic = (tv - 2.0 / 3.0).abs() < 1e-12 && (bs - 0.2222).abs() < 1e-4;

    let d = |a: f64, b: f64, n: f64| lpg_core::domain::ChoiceDistribution::new(a, b, n).unwrap();
    // observed two-way gaps 0.08 (excluded) and 0.20 (included), both predicted the wrong way round
    let obs = vec![d(0.54, 0.46, 0.0), d(0.6, 0.4, 0.0)];
    let preds = vec![d(0.3, 0.6, 0.1), d(0.3, 0.6, 0.1)];
    let m = compute_metrics(&preds, &obs, MetricsMode::TwoWay).unwrap();
    let exclusion = m.n_directional == 1 && m.directional_accuracy == 0.0;
    let same = compute_metrics(&obs, &obs, MetricsMode::ThreeWay).unwrap();
    let identical = same.kl == 0.0 && same.tv == 0.0 && same.brier == 0.0 && same.directional_accuracy == 1.0;
    verdict(
        zero && arithmetic && exclusion && identical,
        format!("identity metrics zero: {}; tv {tv:.4}, brier {bs:.4}; 0.08-gap pair excluded: {exclusion}", zero && identical),
    )
}

fn main() {
    type Criterion = (&'static str, fn() -> Verdict);
    let criteria: [Criterion; 11] = [
        ("gradient_oracle", stage_gradient_oracle),
        ("projection_oracle", projection_oracle),
        ("equilibrium_identity", equilibrium_identity),
        ("similarity_cross_check", similarity_cross_check),
        ("outer_gradient_oracle", outer_gradient_oracle),
        ("synthetic_recovery", synthetic_recovery),
        ("variant_invariants", variant_invariants),
        ("elo_suite", elo_suite),
        ("environment_suite", environment_suite),
        ("end_to_end_desk_run", end_to_end),
        ("metrics_identities", metrics_identities),
    ];
    // `cargo test -- <filter>` passes a filter; honour it loosely
    let filter: Option<String> = std::env::args().skip(1).find(|a| !a.starts_with('-'));
    let (mut ran, mut failed) = (0, 0);
    for (name, run) in criteria {
        if filter.as_deref().is_some_and(|f| !name.contains(f)) {
            continue;
        }
        let v = run();
        println!("{} {name}: {}", if v.pass { "PASS" } else { "FAIL" }, v.detail);
        ran += 1;
        failed += usize::from(!v.pass);
    }
    // A report, not a gate: a criterion that does not hold prints FAIL and
    // stays visible here rather than being tuned away.
    println!("acceptance: {} passed, {failed} failed", ran - failed);
}
