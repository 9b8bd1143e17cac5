//! Acceptance run: one PASS/FAIL line per criterion. Exits nonzero when any
//! criterion fails.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::time::Instant;

use narrative_core::changepoint::{
    detect_tree, featurize, ClassifierConfig, SignificanceConfig, TreeConfig,
};
use narrative_core::corpus::{build_vocabulary, NarrativeTriplet, TripletKey};
use narrative_core::evalharness::{
    mean_by, run_cluster_experiment, run_noise_experiment, run_overlap_experiment, ClusterExperiment, ClusterMethod,
    GapCurve, LocateConfig, Locator, NoiseExperiment, OverlapExperiment,
};
use narrative_core::fragments::{
    aggregate_fragments, birch_fit, cluster_triplets, frame_map, ArgumentMode, Cf, CfTree, ClusterConfig,
    EmbeddingSource, FrameMap, DEFAULT_THRESHOLD,
};
use narrative_core::network::{
    build_network, disparity_filter, edge_alphas, export_json, global_network, local_network, WeightedTriplet,
};
use narrative_core::significance::{frame_scores, log_odds, CorpusCounts, LogOddsForm, RankConfig};
use narrative_core::synthgen::{gen_cluster_run, gen_noise_run, EventPool, RunConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const REPS: usize = 10;

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: impl Into<String>) -> Verdict {
    Verdict {
        pass,
        detail: detail.into(),
    }
}

fn noise_curve(pool: &EventPool) -> (GapCurve, Vec<f64>) {
    let mut points = Vec::new();
    let mut secs = Vec::new();
    let mut truth = 0.0;
    for i in 0..10 {
        let exp = NoiseExperiment {
            ratios: vec![i as f64 / 10.0],
            locate: LocateConfig {
                repetitions: REPS,
                locators: vec![Locator::Mtchd, Locator::KernelDaily],
                ..LocateConfig::default()
            },
        };
        let t = Instant::now();
        let curve = run_noise_experiment(pool, &exp).expect("noise experiment");
        secs.push(t.elapsed().as_secs_f64());
        truth = curve.true_day;
        points.extend(curve.points);
    }
    (GapCurve { true_day: truth, points }, secs)
}

fn criterion_1(curve: &GapCurve, secs: &[f64]) -> Verdict {
    let mut ok = true;
    let mut parts = Vec::new();
    for p in curve.points.iter().filter(|p| p.noise_ratio <= 0.7 + 1e-9) {
        let g = p.mean_gap(Locator::Mtchd).unwrap();
        ok &= g <= 1.0;
        parts.push(format!("{:.1}:{g:.2}", p.noise_ratio));
    }
    let slowest = secs.iter().cloned().fold(0.0, f64::max);
    ok &= slowest <= 300.0;
    verdict(ok, format!("MtChD mean gap by ratio [{}]; slowest grid point {slowest:.0}s", parts.join(" ")))
}

fn criterion_2(curve: &GapCurve) -> Verdict {
    let mut ok = true;
    let mut parts = Vec::new();
    for p in curve.points.iter().filter(|p| p.noise_ratio >= 0.7 - 1e-9) {
        let m = p.mean_gap(Locator::Mtchd).unwrap();
        let k = p.mean_gap(Locator::KernelDaily).unwrap();
        ok &= k > m;
        parts.push(format!("{:.1}: kernel {k:.2} vs MtChD {m:.2}", p.noise_ratio));
    }
    verdict(ok, parts.join("; "))
}

fn criterion_3(pool: &EventPool) -> Verdict {
    let exp = OverlapExperiment {
        a1: vec![1.0],
        a2: vec![1.0],
        overlap_days: vec![2, 4],
        locate: LocateConfig {
            repetitions: REPS,
            locators: vec![Locator::Mtchd],
            ..LocateConfig::default()
        },
    };
    let curve = run_overlap_experiment(pool, &exp).expect("overlap experiment");
    let mut ok = true;
    let mut parts = Vec::new();
    for p in &curve.points {
        let want = curve.true_day - p.overlap_days as f64;
        let preds: Vec<f64> = p.samples.iter().map(|s| s.predicted_day).collect();
        ok &= preds.iter().all(|d| (d - want).abs() <= 1.0);
        parts.push(format!("d={}: want {want}, got {preds:?}", p.overlap_days));
    }
    verdict(ok, parts.join("; "))
}

fn cluster_results(pool: &EventPool) -> Vec<narrative_core::evalharness::ClusterEvalResult> {
    let mut methods = vec![ClusterMethod::Birch {
        threshold: DEFAULT_THRESHOLD,
    }];
    methods.extend([1.0, 1.5, 2.0, 2.5, 3.0, 3.5].map(|threshold| ClusterMethod::Birch { threshold }));
    let exp = ClusterExperiment {
        methods,
        repetitions: REPS,
        ..ClusterExperiment::default()
    };
    run_cluster_experiment(pool, &exp).expect("cluster experiment")
}

fn criterion_4(results: &[narrative_core::evalharness::ClusterEvalResult]) -> Verdict {
    let label = ClusterMethod::Birch {
        threshold: DEFAULT_THRESHOLD,
    }
    .label();
    let grid: BTreeSet<usize> = results.iter().map(|r| r.n_noise).collect();
    let recall: Vec<(usize, f64)> = grid
        .iter()
        .map(|&n| (n, mean_by(results, &label, n, |r| r.relative.recall).unwrap()))
        .collect();
    let precision: Vec<f64> = grid
        .iter()
        .map(|&n| mean_by(results, &label, n, |r| r.relative.precision).unwrap())
        .collect();
    let r0 = recall[0].1;
    let non_increasing = recall.windows(2).all(|w| w[1].1 <= w[0].1 + 1e-12);
    let floor = recall.iter().filter(|(n, _)| *n <= 104).all(|(_, r)| *r >= 0.85);
    let p_min = precision.iter().cloned().fold(f64::INFINITY, f64::min);
    let ok = recall[0].0 == 0 && r0 >= 0.92 && non_increasing && floor && p_min >= 0.55;
    let series: Vec<String> = recall
        .iter()
        .zip(&precision)
        .map(|((n, r), p)| format!("{n}:{r:.3}/{p:.3}"))
        .collect();
    verdict(
        ok,
        format!(
            "{label}: recall at 0 = {r0:.3}, non-increasing = {non_increasing}, min precision = {p_min:.3} \
             [n_noise:recall/precision {}]",
            series.join(" ")
        ),
    )
}

/// `1 - (k - 1) * integral_0^p (1 - x)^(k - 2) dx`, composite Simpson.
fn alpha_by_quadrature(p: f64, k: usize) -> f64 {
    let n = 4000;
    let h = p / n as f64;
    let f = |x: f64| (1.0 - x).powi(k as i32 - 2);
    let mut s = f(0.0) + f(p);
    for i in 1..n {
        s += f(i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
    }
    1.0 - (k - 1) as f64 * s * h / 3.0
}

fn criterion_5() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut worst: f64 = 0.0;
    let mut compared = 0;
    let mut nested = true;
    for _ in 0..100 {
        let n_nodes = rng.gen_range(2..8);
        let items: Vec<WeightedTriplet> = (0..rng.gen_range(1..=20))
            .map(|_| WeightedTriplet {
                triplet: TripletKey::new(
                    &format!("n{}", rng.gen_range(0..n_nodes)),
                    "F",
                    &format!("n{}", rng.gen_range(0..n_nodes)),
                ),
                weight: rng.gen_range(0.01..5.0),
                support: 1,
            })
            .collect();
        let net = build_network(&items);
        let mut out: HashMap<&str, (f64, usize)> = HashMap::new();
        let mut inn: HashMap<&str, (f64, usize)> = HashMap::new();
        for e in &net.edges {
            let o = out.entry(&e.source).or_default();
            o.0 += e.weight;
            o.1 += 1;
            let i = inn.entry(&e.target).or_default();
            i.0 += e.weight;
            i.1 += 1;
        }
        for (e, (a_out, a_in)) in net.edges.iter().zip(edge_alphas(&net).unwrap()) {
            for (got, (s, k)) in [(a_out, out[e.source.as_str()]), (a_in, inn[e.target.as_str()])] {
                if let Some(a) = got {
                    worst = worst.max((a - alpha_by_quadrature(e.weight / s, k)).abs());
                    compared += 1;
                }
            }
        }
        let mut prev: Option<BTreeSet<TripletKey>> = None;
        for alpha in [1e-7, 1e-4, 0.01, 0.05, 0.2, 0.5, 0.9] {
            let kept: BTreeSet<TripletKey> =
                disparity_filter(&net, alpha).unwrap().backbone.edges.iter().map(|e| e.key()).collect();
            if let Some(p) = &prev {
                nested &= p.is_subset(&kept);
            }
            prev = Some(kept);
        }
    }
    verdict(
        worst <= 1e-8 && nested && compared > 0,
        format!("{compared} directional tests, max |closed form - quadrature| = {worst:.2e}, nesting = {nested}"),
    )
}

fn criterion_6() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut worst: f64 = 0.0;
    let mut antisymmetric = true;
    let key = |i: usize| TripletKey::new(&format!("k{i}"), "F", "x");
    for _ in 0..1000 {
        let n_keys = rng.gen_range(1..6);
        let ft: Vec<u64> = (0..n_keys).map(|_| rng.gen_range(0..30)).collect();
        let fr: Vec<u64> = (0..n_keys).map(|_| rng.gen_range(0..30)).collect();
        let fb: Vec<u64> = (0..n_keys).map(|i| ft[i] + fr[i] + rng.gen_range(1..30)).collect();
        let pad = rng.gen_range(1..100);
        let counts = |f: &[u64]| -> CorpusCounts { f.iter().enumerate().map(|(i, &c)| (key(i), c)).collect() };
        let (t, r) = (counts(&ft), counts(&fr));
        let mut b = counts(&fb);
        b.add(TripletKey::new("pad", "F", "x"), pad);
        let scores = log_odds(&t, &r, &b, LogOddsForm::Canonical).unwrap();
        let swapped = log_odds(&r, &t, &b, LogOddsForm::Canonical).unwrap();
        let (nt, nr, nb) = (t.n() as f64, r.n() as f64, b.n() as f64);
        for (s, sw) in scores.iter().zip(&swapped) {
            antisymmetric &= s.s_w == -sw.s_w;
            if s.triplet.a0 == "pad" {
                continue;
            }
            let i: usize = s.triplet.a0[1..].parse().unwrap();
            let (a, c, bb) = (ft[i] as f64, fr[i] as f64, fb[i] as f64);
            let direct = ((a + bb) / (nt + nb - a - bb)).ln() - ((c + bb) / (nr + nb - c - bb)).ln();
            worst = worst.max((s.s_w - direct).abs());
        }
    }
    verdict(
        worst <= 1e-12 && antisymmetric,
        format!("1000 configs, max |s_w - direct| = {worst:.2e}, antisymmetry exact = {antisymmetric}"),
    )
}

fn criterion_7(results: &[narrative_core::evalharness::ClusterEvalResult]) -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut radius_ok = true;
    let mut additive: f64 = 0.0;
    for _ in 0..100 {
        let dim = rng.gen_range(1..6);
        let t = rng.gen_range(0.1..3.0);
        let mut tree = CfTree::new(t, rng.gen_range(2..10));
        let n = rng.gen_range(1..200);
        let pts: Vec<Vec<f64>> = (0..n).map(|_| (0..dim).map(|_| rng.gen_range(-5.0..5.0)).collect()).collect();
        for p in &pts {
            tree.insert(p, 1.0);
        }
        radius_ok &= tree.check().is_ok() && tree.subclusters().iter().all(|c| c.radius() <= t + 1e-9);
        // additivity: merged subclusters equal the direct sums over all points
        let mut total = tree.subclusters()[0].clone();
        for c in &tree.subclusters()[1..] {
            total.merge(c);
        }
        let direct = pts.iter().skip(1).fold(Cf::point(&pts[0], 1.0), |acc, p| acc.merged(&Cf::point(p, 1.0)));
        let ls: Vec<f64> = (0..dim).map(|d| pts.iter().map(|p| p[d]).sum()).collect();
        let ss: f64 = pts.iter().map(|p| p.iter().map(|x| x * x).sum::<f64>()).sum();
        additive = additive
            .max((total.n - n as f64).abs())
            .max((total.ss - ss).abs())
            .max((direct.ss - ss).abs());
        for d in 0..dim {
            additive = additive.max((total.ls[d] - ls[d]).abs()).max((direct.ls[d] - ls[d]).abs());
        }
    }

    // two blobs: centres 10 apart, radius 0.5, T = 2
    let mut blobs_exact = true;
    for seed in 0..20 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut pts = Vec::new();
        let mut truth = Vec::new();
        for _ in 0..100 {
            let b = rng.gen_range(0..2);
            let (r, th) = (rng.gen_range(0.0..0.5f64), rng.gen_range(0.0..std::f64::consts::TAU));
            pts.push(vec![10.0 * b as f64 + r * th.cos(), r * th.sin()]);
            truth.push(b);
        }
        let fit = birch_fit(&pts, None, 2.0, 50);
        let mut map = BTreeMap::new();
        blobs_exact &= fit.n_clusters == 2
            && fit.labels.iter().zip(&truth).all(|(l, t)| *map.entry(*l).or_insert(*t) == *t);
    }

    // threshold sweep on the synthetic narratives, per run
    let sweep: Vec<String> = [1.0, 1.5, 2.0, 2.5, 3.0, 3.5]
        .iter()
        .map(|&t| ClusterMethod::Birch { threshold: t }.label())
        .collect();
    let mut by_run: BTreeMap<(usize, usize), Vec<usize>> = BTreeMap::new();
    for label in &sweep {
        for r in results.iter().filter(|r| &r.method == label) {
            by_run.entry((r.n_noise, r.rep)).or_default().push(r.n_clusters);
        }
    }
    let sweep_ok = !by_run.is_empty()
        && by_run.values().all(|c| c.len() == sweep.len() && c.windows(2).all(|w| w[1] <= w[0]));
    let example = by_run.values().next().cloned().unwrap_or_default();
    verdict(
        radius_ok && additive <= 1e-6 && blobs_exact && sweep_ok,
        format!(
            "leaf radius <= T on 100 datasets = {radius_ok}, CF additivity err = {additive:.2e}, \
             two blobs exact = {blobs_exact}, sweep non-increasing on {} runs = {sweep_ok} (e.g. {example:?})",
            by_run.len()
        ),
    )
}

fn criterion_8(pool: &EventPool) -> Verdict {
    let mut ok = true;
    let mut checked = 0;
    let mut example = None;
    for n_noise in (0..=104).step_by(13) {
        for seed in 0..3u64 {
            let triplets: Vec<NarrativeTriplet> =
                gen_cluster_run(pool, n_noise, seed).unwrap().into_iter().map(|i| i.triplet).collect();
            for mode in [ArgumentMode::Joint, ArgumentMode::Separate] {
                let c = aggregate_fragments(
                    &triplets,
                    FrameMap::bundled(),
                    &EmbeddingSource::default(),
                    &ClusterConfig::default(),
                    mode,
                )
                .unwrap()
                .counts;
                ok &= c.frame_mapped <= c.raw
                    && c.triplet_clustered <= c.frame_mapped
                    && c.argument_clustered <= c.triplet_clustered;
                checked += 1;
                if n_noise == 104 && example.is_none() {
                    example = Some(c);
                }
            }
        }
    }
    let run = gen_noise_run(pool, 0.5, 3, &RunConfig::default()).unwrap();
    let c = aggregate_fragments(
        &run.triplets,
        FrameMap::bundled(),
        &EmbeddingSource::default(),
        &ClusterConfig::default(),
        ArgumentMode::Joint,
    )
    .unwrap()
    .counts;
    ok &= c.frame_mapped <= c.raw && c.triplet_clustered <= c.frame_mapped && c.argument_clustered <= c.triplet_clustered;
    verdict(ok, format!("{} aggregations, e.g. {:?}", checked + 1, example.unwrap()))
}

/// Every artefact of one pass, rendered to bytes.
fn artefacts(pool: &EventPool) -> Vec<(String, String)> {
    let run = gen_noise_run(pool, 0.3, 5, &RunConfig::default()).unwrap();
    let vocab = build_vocabulary(&run.docs, 2000).unwrap();
    let obs = featurize(&run.docs, &vocab);
    let cfg = ClassifierConfig {
        n_trees: 20,
        seed: 9,
        ..ClassifierConfig::default()
    };
    let sig = SignificanceConfig::Permutation {
        rounds: 5,
        quantile: 0.95,
    };
    let tree = detect_tree(&obs, &cfg, &sig, &TreeConfig::default()).unwrap();
    let mapped: Vec<NarrativeTriplet> = run.triplets.iter().map(|t| frame_map(t, FrameMap::bundled())).collect();
    let model = cluster_triplets(&mapped, &EmbeddingSource::default(), &ClusterConfig::default()).unwrap();
    let clustered = model.apply(&mapped);
    let frames = tree.leaves();
    let scores = frame_scores(&frames, &clustered, &RankConfig::default(), None).unwrap();
    let mut out = vec![
        ("segment tree".to_string(), tree.to_json()),
        ("cluster model".to_string(), model.to_json()),
        ("global graph".to_string(), export_json(&global_network(&clustered))),
    ];
    for (i, s) in scores.iter().enumerate() {
        let net = local_network(s);
        out.push((format!("frame {i} graph"), export_json(&net)));
        out.push((
            format!("frame {i} backbone"),
            export_json(&disparity_filter(&net, 0.01).unwrap().backbone),
        ));
    }
    out
}

fn criterion_9(pool: &EventPool) -> Verdict {
    let with_threads = |n: usize| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .unwrap()
            .install(|| artefacts(pool))
    };
    let a = with_threads(1);
    let b = with_threads(4);
    let c = artefacts(pool);
    let differing: Vec<&str> = a
        .iter()
        .zip(&b)
        .zip(&c)
        .filter(|((x, y), z)| x != y || x != z)
        .map(|((x, _), _)| x.0.as_str())
        .collect();
    verdict(
        a.len() == b.len() && differing.is_empty(),
        format!("{} artefacts compared across 1, 4 and default threads; differing: {differing:?}", a.len()),
    )
}

fn main() {
    let pool = EventPool::bundled().expect("bundled pool");
    let started = Instant::now();
    let mut verdicts: Vec<(usize, Verdict)> = Vec::new();

    let (curve, secs) = noise_curve(&pool);
    verdicts.push((1, criterion_1(&curve, &secs)));
    verdicts.push((2, criterion_2(&curve)));
    verdicts.push((3, criterion_3(&pool)));
    let clusters = cluster_results(&pool);
    verdicts.push((4, criterion_4(&clusters)));
    verdicts.push((5, criterion_5()));
    verdicts.push((6, criterion_6()));
    verdicts.push((7, criterion_7(&clusters)));
    verdicts.push((8, criterion_8(&pool)));
    verdicts.push((9, criterion_9(&pool)));

    println!();
    let mut failed = 0;
    for (i, v) in &verdicts {
        println!("criterion {i}: {} - {}", if v.pass { "PASS" } else { "FAIL" }, v.detail);
        failed += usize::from(!v.pass);
    }
    println!(
        "acceptance: {} passed, {failed} failed in {:.0}s",
        verdicts.len() - failed,
        started.elapsed().as_secs_f64()
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
