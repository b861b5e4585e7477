//! End-to-end acceptance checks, one PASS/FAIL line per criterion.

use std::collections::{BTreeMap, HashMap};
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use bart_mh::data::{self, Dataset, ScaledData};
use bart_mh::diagnostics;
use bart_mh::model::{self, Hyperparams, LeafStats};
use bart_mh::proposals::{
    propose_birth_death, propose_change_var, propose_perturb, propose_rotate, CorrelationPreconditioner,
    CutLikelihood, KernelSettings, ProposalKind, Step, Target,
};
use bart_mh::sampler::{run_chain, ProposalWeights, RunConfig};
use bart_mh::structural::{cut_left, cut_right, enumerate_merges, propose_rotation, rotate_and_cut};
use bart_mh::tree::{all_trees, random_tree, CutpointGrid, Node, NodeId, SplitRule};
use bart_mh::Tree;

struct Report {
    failed: usize,
}

impl Report {
    fn line(&mut self, id: &str, name: &str, pass: bool, detail: String) {
        if !pass {
            self.failed += 1;
        }
        println!("{} {id} {name}: {detail}", if pass { "PASS" } else { "FAIL" });
    }
}

fn parse(s: &str) -> Node<f64> {
    Tree::parse(s).unwrap().root().clone()
}

// 1. merge preimages
fn merge_oracle(rep: &mut Report) {
    let start = Instant::now();
    let grid = CutpointGrid::uniform(2, 5).unwrap();
    let trees: Vec<Tree> = all_trees(&grid, 3);
    let (mut cases, mut missing, mut unsound) = (0usize, 0usize, 0usize);
    for t in &trees {
        let mut rules: Vec<SplitRule> = t.internal_ids().iter().map(|&id| t.node(id).unwrap().rule().unwrap()).collect();
        rules.sort();
        rules.dedup();
        for rule in rules {
            cases += 1;
            let (l, r) = (cut_left(t.root(), rule), cut_right(t.root(), rule));
            let set = enumerate_merges(&l, &r, rule);
            if !set.contains(t.root()) {
                missing += 1;
            }
            for m in set.all() {
                if cut_left(m, rule) != l || cut_right(m, rule) != r {
                    unsound += 1;
                }
            }
        }
    }
    let secs = start.elapsed().as_secs_f64();
    rep.line(
        "1",
        "merge preimage oracle",
        missing == 0 && unsound == 0 && secs < 60.0,
        format!("{} trees, {cases} (tree, rule) cases, {missing} missing, {unsound} failing round-trip, {secs:.1}s", trees.len()),
    );
}

// 2. rotation keeps predictions
fn rotation_invariance(rep: &mut Report) {
    let grid = CutpointGrid::uniform(3, 11).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let (mut pairs, mut worst) = (0usize, 0f64);
    while pairs < 1000 {
        let t: Tree = random_tree(&grid, 5, 0.85, &mut rng);
        let ids = t.rotatable_ids();
        if ids.is_empty() {
            continue;
        }
        let id = ids[rng.random_range(0..ids.len())];
        let Ok(rot) = rotate_and_cut(&t, id) else { continue };
        pairs += 1;
        for _ in 0..100 {
            let x: Vec<f64> = (0..3).map(|_| rng.random()).collect();
            worst = worst.max((t.evaluate(&x, &grid) - rot.evaluate(&x, &grid)).abs());
        }
    }
    rep.line("2", "rotation prediction invariance", worst <= 1e-12, format!("{pairs} pairs x 100 points, max |diff| {worst:e}"));
}

// 3. exhaustive posterior
fn exhaustive_posterior(rep: &mut Report) {
    let start = Instant::now();
    let n = 20;
    let mut rng = ChaCha8Rng::seed_from_u64(33);
    let x: Vec<Vec<f64>> = (0..n).map(|i| vec![i as f64 / (n - 1) as f64]).collect();
    let y: Vec<f64> = x
        .iter()
        .map(|r| if r[0] < 0.5 { 0.0 } else { 0.6 } + 0.5 * rand_distr::Distribution::<f64>::sample(&rand_distr::StandardNormal, &mut rng))
        .collect();
    let ds = Dataset { x, y, truth: None, names: vec!["x1".into()] };
    let data: ScaledData<f64> = data::scale_dataset(&ds, 5).unwrap();
    let mut hyper = Hyperparams::defaults(1);
    hyper.min_leaf_n = 1;
    hyper.max_depth = Some(2);
    let sigma2 = data.scaling.scale_var(0.25);

    let trees: Vec<Tree> = all_trees(&data.grid, 2);
    let logw: Vec<f64> = trees
        .iter()
        .map(|t| {
            model::log_prior(t, &hyper, &data.grid) + model::log_integrated_likelihood(t, &data, &data.y, sigma2, &hyper).unwrap()
        })
        .collect();
    let top = logw.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let z: f64 = logw.iter().map(|w| (w - top).exp()).sum();
    let exact: BTreeMap<String, f64> =
        trees.iter().zip(&logw).map(|(t, w)| (t.structure_key(), (w - top).exp() / z)).collect();

    let mixes: [(&str, ProposalWeights, CutLikelihood); 6] = [
        ("birth/death", ProposalWeights::birth_death_only(), CutLikelihood::Integrated),
        ("+perturb", ProposalWeights { birth_death: 0.5, perturb: 0.5, change_var: 0.0, rotate: 0.0 }, CutLikelihood::Integrated),
        ("+change-var", ProposalWeights { birth_death: 0.5, perturb: 0.0, change_var: 0.5, rotate: 0.0 }, CutLikelihood::Integrated),
        ("+rotate", ProposalWeights::with_rotate(0.5), CutLikelihood::Integrated),
        ("all", ProposalWeights::default(), CutLikelihood::Integrated),
        ("all, conditional cut moves", ProposalWeights::default(), CutLikelihood::Conditional),
    ];
    let (keep, batches) = (100_000usize, 50usize);
    let mut worst_z = 0f64;
    let mut all_ok = true;
    let mut notes = Vec::new();
    for (k, (name, weights, lik)) in mixes.iter().enumerate() {
        let mut cfg = RunConfig::new(hyper.clone(), 2000, keep, 100 + k as u64);
        cfg.weights = weights.clone();
        cfg.cut_likelihood = *lik;
        cfg.sigma2_fixed = Some(sigma2);
        let res = run_chain(&cfg, &data, &[]).unwrap();
        let keys: Vec<&str> = res.trees.iter().map(|d| d[0].as_str()).collect();
        let blen = keep / batches;
        let mut mix_worst = 0f64;
        for (key, &p) in &exact {
            let means: Vec<f64> = keys
                .chunks(blen)
                .map(|c| c.iter().filter(|&&s| s == key).count() as f64 / blen as f64)
                .collect();
            let mean = means.iter().sum::<f64>() / batches as f64;
            let var = means.iter().map(|m| (m - mean).powi(2)).sum::<f64>() / (batches - 1) as f64;
            // a floor keeps rarely visited states from giving a zero sd
            let se = (var / batches as f64).sqrt().max((p * (1.0 - p) / keep as f64).sqrt());
            let zs = (mean - p).abs() / se;
            mix_worst = mix_worst.max(zs);
        }
        let visited_outside = keys.iter().filter(|k| !exact.contains_key(**k)).count();
        if mix_worst > 3.0 || visited_outside > 0 {
            all_ok = false;
        }
        worst_z = worst_z.max(mix_worst);
        notes.push(format!("{name} max z {mix_worst:.2}"));
    }
    let secs = start.elapsed().as_secs_f64();
    let pmin = exact.values().cloned().fold(1.0, f64::min);
    rep.line(
        "3",
        "exhaustive posterior equivalence",
        all_ok && secs < 300.0,
        format!("{} trees (min mass {pmin:.3}); {}; {secs:.1}s", exact.len(), notes.join(", ")),
    );
}

fn root_var(key: &str) -> Option<usize> {
    Tree::parse(key).ok()?.root().rule().map(|r| r.var)
}

// 4. Wu synthetic structural mixing
fn wu_runs(rep: &mut Report) {
    let seeds = [1u64, 2, 3, 4, 5];
    let run = |m: usize, weights: ProposalWeights, seed: u64| {
        let ds = data::gen_wu_synthetic(seed);
        let data: ScaledData<f64> = data::scale_dataset(&ds, 100).unwrap();
        let mut hyper = Hyperparams::defaults(m);
        hyper.calibrate_lambda(model::naive_sigma2(&data.y), 0.9);
        let mut cfg = RunConfig::new(hyper, 1000, 4000, seed);
        cfg.weights = weights;
        run_chain(&cfg, &data, &[]).unwrap()
    };

    let mut details = Vec::new();
    let mut passes = 0;
    for &s in &seeds {
        let r = run(1, ProposalWeights::birth_death_only(), s);
        let acc = diagnostics::acceptance_rate(&r.outcomes, &[ProposalKind::Birth, ProposalKind::Death], r.burnin).unwrap();
        let census = diagnostics::tree_census(&r.trees);
        if acc < 0.01 && census.len() == 1 {
            passes += 1;
        }
        details.push(format!("{:.2}%/{}", 100.0 * acc, census.len()));
    }
    rep.line(
        "4a",
        "Wu birth/death only, m = 1",
        passes >= 4,
        format!("{passes}/5 seeds with acceptance < 1% and census size 1 (acceptance/census per seed: {})", details.join(" ")),
    );

    let diverse = |census: &BTreeMap<String, usize>| {
        let roots: Vec<Option<usize>> = census.keys().map(|k| root_var(k)).collect();
        census.len() >= 2 && roots.contains(&Some(0)) && roots.contains(&Some(2))
    };
    let mut passes = 0;
    let mut details = Vec::new();
    for &s in &seeds {
        let w = ProposalWeights { birth_death: 0.5, perturb: 0.0, change_var: 0.2, rotate: 0.3 };
        let census = diagnostics::tree_census(&run(1, w, s).trees);
        passes += diverse(&census) as usize;
        details.push(census.len().to_string());
    }
    rep.line(
        "4b",
        "Wu birth/death + rotate + change-var, m = 1",
        passes >= 4,
        format!("{passes}/5 seeds with x1- and x3-rooted trees (census sizes {})", details.join(" ")),
    );

    let mut passes = 0;
    let mut details = Vec::new();
    for &s in &seeds {
        let census = diagnostics::tree_census(&run(10, ProposalWeights::with_rotate(0.5), s).trees);
        passes += diverse(&census) as usize;
        details.push(census.len().to_string());
    }
    rep.line(
        "4c",
        "Wu birth/death + rotate, m = 10",
        passes >= 4,
        format!("{passes}/5 seeds with x1- and x3-rooted trees (census sizes {})", details.join(" ")),
    );
}

// 5. Friedman regimes
fn friedman_regimes(rep: &mut Report) {
    let start = Instant::now();
    let ds = data::gen_friedman(1000, 0.1, 5, 10).unwrap();
    let test = data::gen_friedman(200, 0.0, 6, 10).unwrap();
    let data: ScaledData<f64> = data::scale_dataset(&ds, 100).unwrap();
    let points = data.bin_points(&test.x);
    let truth = test.truth.clone().unwrap();
    let mut hyper = Hyperparams::defaults(50);
    hyper.calibrate_lambda(model::naive_sigma2(&data.y), 0.9);
    let regimes = [
        ("birth/death", ProposalWeights::birth_death_only()),
        ("+rotate 20%", ProposalWeights::with_rotate(0.2)),
        ("+rotate+perturb+change-var", ProposalWeights::default()),
    ];
    let mut acc = Vec::new();
    let mut cov = Vec::new();
    for (_, w) in &regimes {
        let mut cfg = RunConfig::new(hyper.clone(), 1000, 1000, 7);
        cfg.weights = w.clone();
        cfg.record_trees = false;
        let r = run_chain(&cfg, &data, &points).unwrap();
        acc.push(diagnostics::acceptance_rate(&r.outcomes, &[], r.burnin).unwrap());
        let rows = diagnostics::interval_table(&r.predictions, 0.9, Some(&truth)).unwrap();
        cov.push(diagnostics::table_coverage(&rows).unwrap());
    }
    let detail = regimes
        .iter()
        .enumerate()
        .map(|(i, (name, _))| format!("{name}: acceptance {:.1}%, coverage {:.1}%", 100.0 * acc[i], 100.0 * cov[i]))
        .collect::<Vec<_>>()
        .join("; ");
    let secs = start.elapsed().as_secs_f64();
    rep.line("5a", "Friedman acceptance ordering", acc[0] < acc[1] && acc[1] < acc[2], format!("{detail}; {secs:.0}s"));
    rep.line(
        "5b",
        "Friedman coverage gain >= 15 points",
        cov[1] - cov[0] >= 0.15 && cov[2] - cov[0] >= 0.15,
        format!("gains {:+.1} and {:+.1} points", 100.0 * (cov[1] - cov[0]), 100.0 * (cov[2] - cov[0])),
    );
}

// 6. worked rotation example
fn worked_example(rep: &mut Report) {
    // P = (x2, #5) over I = (x1, #5) with children Tq, Tr; the grey subtree
    // on x1 sits to the right. Tq and Tr have one internal node each.
    let tq = "(2:3:[10.0] [11.0])";
    let tr = "(2:7:[12.0] [13.0])";
    let ts = "(0:3:(0:2:[1.0] [2.0]) (0:7:[3.0] (0:8:[4.0] [5.0])))";
    let t = Tree::from_root(parse(&format!("(1:5:(0:5:{tq} {tr}) {ts})")));
    let (nq, nr) = (1.0, 1.0);
    let close = |a: f64, b: f64| (a - b).abs() < 1e-12;
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let p = propose_rotation(&t, NodeId(2), &mut rng).unwrap();
    let first = close(p.p_s1, 1.0 / 3.0)
        && close(p.p_s2, 1.0)
        && close(p.p_m1, 1.0)
        && close(p.p_m2, 1.0)
        && close(p.p_r_forward, 1.0 / (nq + nr + 5.0));
    let t1 = p.tree;
    let mut second = true;
    let mut seen = HashMap::new();
    for seed in 0..200 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let q = propose_rotation(&t1, NodeId(2), &mut rng).unwrap();
        second &= close(q.p_r_forward, 2.0 / (nq + nr + 6.0))
            && close(q.p_m1, 1.0 / 3.0)
            && close(q.p_m2, 1.0)
            && close(q.p_s1, 1.0)
            && close(q.p_s2, 1.0);
        *seen.entry(q.tree.structure_key()).or_insert(0) += 1;
    }
    second &= seen.len() == 3 && seen.contains_key(&t.structure_key());
    rep.line(
        "6",
        "worked rotation example",
        first && second,
        format!(
            "first: p_s1 = {:.4}, p_r = {:.4}; second: p_r = {:.4}, merge choice 1/3 over {} outcomes",
            p.p_s1,
            p.p_r_forward,
            2.0 / (nq + nr + 6.0),
            seen.len()
        ),
    );
}

// 7. CLI determinism
fn cli_determinism(rep: &mut Report) {
    let bin = PathBuf::from(env!("CARGO_BIN_EXE_bart-mh"));
    let run_pipeline = |dir: &Path| -> Result<(), String> {
        let cfg = dir.join("run.toml");
        std::fs::write(
            &cfg,
            "burnin = 100\nkeep = 200\n[weights]\nbirth_death = 0.5\nperturb = 0.1\nchange_var = 0.2\nrotate = 0.2\n[hyper]\nm = 5\n",
        )
        .map_err(|e| e.to_string())?;
        let steps: Vec<Vec<String>> = vec![
            vec!["generate", "--benchmark", "wu", "--seed", "1", "--out", "wu.csv"],
            vec!["generate", "--benchmark", "friedman", "--n", "200", "--seed", "4", "--out", "fr.csv"],
            vec!["generate", "--benchmark", "friedman", "--n", "50", "--sigma2", "0", "--seed", "5", "--out", "fr_test.csv"],
            vec!["fit", "--data", "wu.csv", "--config", "run.toml", "--seed", "9", "--chains", "2", "--out", "fit_wu"],
            vec!["fit", "--data", "fr.csv", "--config", "run.toml", "--seed", "9", "--points", "fr_test.csv", "--out", "fit_fr"],
            vec!["predict", "--fit", "fit_fr", "--points", "fr_test.csv", "--out", "pred.csv"],
            vec!["diagnose", "--fit", "fit_wu/chain-1", "--out", "diag"],
        ]
        .into_iter()
        .map(|v| v.into_iter().map(String::from).collect())
        .collect();
        for args in steps {
            let out = Command::new(&bin).args(&args).current_dir(dir).output().map_err(|e| e.to_string())?;
            if !out.status.success() {
                return Err(format!("{args:?}: {}", String::from_utf8_lossy(&out.stderr)));
            }
        }
        Ok(())
    };
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let result = run_pipeline(a.path()).and_then(|_| run_pipeline(b.path()));
    let (pass, detail) = match result {
        Err(e) => (false, format!("pipeline failed: {e}")),
        Ok(()) => {
            let files = list_files(a.path());
            let differing: Vec<String> = files
                .iter()
                .filter(|f| std::fs::read(a.path().join(f)).ok() != std::fs::read(b.path().join(f)).ok())
                .map(|f| f.display().to_string())
                .collect();
            (differing.is_empty() && files.len() > 10, format!("{} files compared, differing: {differing:?}", files.len()))
        }
    };
    rep.line("7", "CLI determinism", pass, detail);
}

fn list_files(root: &Path) -> Vec<PathBuf> {
    let mut out = Vec::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in std::fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.push(p.strip_prefix(root).unwrap().to_path_buf());
            }
        }
    }
    out.sort();
    out
}

// 8. numerics
fn numerical_checks(rep: &mut Report) {
    // single leaf against Simpson's rule on the joint density of (y, mu)
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut worst_rel = 0f64;
    for _ in 0..20 {
        let n = rng.random_range(1..40);
        let sigma2: f64 = rng.random_range(0.01..1.0);
        let tau: f64 = rng.random_range(0.05..1.0);
        let rs: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let closed = model::log_marginal_leaf(LeafStats::from_values(&rs), sigma2, tau);
        let log_joint = |mu: f64| {
            rs.iter().map(|r| -0.5 * (2.0 * std::f64::consts::PI * sigma2).ln() - (r - mu).powi(2) / (2.0 * sigma2)).sum::<f64>()
                - 0.5 * (2.0 * std::f64::consts::PI * tau * tau).ln()
                - mu * mu / (2.0 * tau * tau)
        };
        let (lo, hi, k) = (-10.0 * tau, 10.0 * tau, 200_000usize);
        let h = (hi - lo) / k as f64;
        let shift = log_joint(rs.iter().sum::<f64>() / (n as f64 + sigma2 / (tau * tau)));
        let mut s = 0.0;
        for i in 0..=k {
            let w = if i == 0 || i == k { 1.0 } else if i % 2 == 1 { 4.0 } else { 2.0 };
            s += w * (log_joint(lo + i as f64 * h) - shift).exp();
        }
        let quad = (s * h / 3.0).ln() + shift;
        worst_rel = worst_rel.max(((closed - quad).exp() - 1.0).abs());
    }
    rep.line("8a", "leaf integrated likelihood vs quadrature", worst_rel <= 1e-6, format!("max relative error {worst_rel:e}"));

    // cached sums of fits against direct evaluation, every sweep
    let ds = data::gen_friedman(300, 0.1, 11, 10).unwrap();
    let data: ScaledData<f64> = data::scale_dataset(&ds, 50).unwrap();
    let mut cfg = RunConfig::new(Hyperparams::defaults(20), 50, 50, 3);
    cfg.verify_every = 1;
    let caches = run_chain(&cfg, &data, &[]);

    // local likelihood deltas against full recomputation
    let mut hyper = Hyperparams::defaults(1);
    hyper.min_leaf_n = 1;
    let settings = KernelSettings::uniform(10, 0.85);
    let precond = CorrelationPreconditioner::identity(10);
    let mut worst = 0f64;
    let mut checked = 0;
    for _ in 0..3000 {
        let t: Tree = random_tree(&data.grid, 4, 0.7, &mut rng);
        let sigma2 = 0.01;
        let Ok(before) = model::log_integrated_likelihood(&t, &data, &data.y, sigma2, &hyper) else { continue };
        let target = Target { data: &data, resid: &data.y, sigma2, hyper: &hyper };
        let step: Step<f64> = match rng.random_range(0..4) {
            0 => propose_birth_death(&t, &target, &mut rng),
            1 => propose_perturb(&t, &target, &settings, &mut rng),
            2 => propose_change_var(&t, &target, &settings, &precond, &mut rng),
            _ => propose_rotate(&t, &target, &mut rng),
        };
        if let (Some(c), Some(d)) = (step.candidate, step.outcome.delta_log_il) {
            let after = model::log_integrated_likelihood(&c, &data, &data.y, sigma2, &hyper).unwrap();
            worst = worst.max((after - before - d).abs());
            checked += 1;
        }
    }
    rep.line(
        "8b",
        "incremental caches vs full recomputation",
        caches.is_ok() && worst <= 1e-10 && checked > 500,
        format!(
            "fit cache check over 100 sweeps: {}; {checked} local likelihood deltas, max error {worst:e}",
            if caches.is_ok() { "ok" } else { "mismatch" }
        ),
    );
}

fn main() {
    let mut rep = Report { failed: 0 };
    merge_oracle(&mut rep);
    rotation_invariance(&mut rep);
    exhaustive_posterior(&mut rep);
    wu_runs(&mut rep);
    friedman_regimes(&mut rep);
    worked_example(&mut rep);
    cli_determinism(&mut rep);
    numerical_checks(&mut rep);
    if rep.failed > 0 {
        std::process::exit(1);
    }
}
