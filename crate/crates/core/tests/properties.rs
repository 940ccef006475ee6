//! Cross-module properties exercised through the public API.

use mobpat::ingest::{validate_dataset, LocationTree};
use mobpat::predict::{
    evaluate_over_time, rnn_gradient_check, EvalConfig, FlowMap, ModelKind, RnnConfig, RnnModel, WindowSpec,
};
use mobpat::som::UMatrix;
use mobpat::synth::{generate, structured_markov, time_oriented_matrix, SynthConfig};
use mobpat::viz::{render_flowmap, render_heatmap, render_umatrix, ColorRamp, RenderSpec};
use mobpat::Grid;
use proptest::prelude::*;

fn svg_root_ok(svg: &str) {
    let doc = roxmltree::Document::parse(svg).expect("well-formed XML");
    assert_eq!(doc.root_element().tag_name().name(), "svg");
}

fn small_config(seed: u64, n_locations: usize, days: usize) -> SynthConfig {
    SynthConfig {
        n_regular: 24,
        n_outstanding: 2,
        n_locations,
        days,
        markov: structured_markov(n_locations, 0.5, 0.3),
        routes: Vec::new(),
        outstanding: mobpat::synth::OutstandingProfile {
            active_days: days,
            ..Default::default()
        },
        seed,
        ..SynthConfig::default()
    }
}

fn spec_strategy() -> impl Strategy<Value = RenderSpec> {
    (64u32..900, 64u32..700, any::<bool>(), any::<bool>()).prop_map(|(w, h, div, legend)| {
        let ramp = if div { ColorRamp::Diverging } else { ColorRamp::Sequential };
        RenderSpec::new(w, h).unwrap().with_ramp(ramp).with_legend(legend)
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn softmax_is_a_distribution(
        seed in 0u64..10_000,
        classes in 2usize..9,
        hidden in 1usize..12,
        raw in prop::collection::vec(0u32..100, 1..12),
    ) {
        let model = RnnModel::new(classes, hidden, seed);
        let seq: Vec<u32> = raw.iter().map(|v| v % classes as u32).collect();
        let p = model.probabilities(&seq);
        prop_assert_eq!(p.len(), classes);
        prop_assert!(p.iter().all(|&v| v >= 0.0 && v.is_finite()));
        prop_assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-6);
    }

    #[test]
    fn bptt_matches_finite_differences(
        seed in 0u64..10_000,
        classes in 2usize..7,
        raw in prop::collection::vec(0u32..100, 1..10),
        label in 0u32..100,
    ) {
        let model = RnnModel::new(classes, 8, seed);
        let seq: Vec<u32> = raw.iter().map(|v| v % classes as u32).collect();
        let err = rnn_gradient_check(&model, (&seq, label % classes as u32), 1e-4, 30, seed);
        prop_assert!(err < 1e-3, "relative error {err}");
    }

    #[test]
    fn heatmaps_are_well_formed_and_pure(
        spec in spec_strategy(),
        rows in 1usize..12,
        cols in 1usize..8,
        vals in prop::collection::vec(-1e6f64..1e6, 96),
        label in "[ -~]{0,12}",
    ) {
        let g = Grid::from_vec(rows, cols, vals[..rows * cols].to_vec());
        let rl: Vec<String> = (0..rows).map(|i| format!("{label}{i}")).collect();
        let cl: Vec<String> = (0..cols).map(|j| format!("<{j}&\"")).collect();
        let a = render_heatmap(&g, &rl, &cl, &spec);
        svg_root_ok(&a);
        prop_assert_eq!(a, render_heatmap(&g, &rl, &cl, &spec));
    }

    #[test]
    fn umatrix_renders_are_well_formed_and_pure(
        spec in spec_strategy(),
        rows in 2usize..10,
        cols in 2usize..10,
        vals in prop::collection::vec(0.0f64..50.0, 100),
        flag in (0usize..10, 0usize..10),
    ) {
        let u = UMatrix { values: Grid::from_vec(rows, cols, vals[..rows * cols].to_vec()) };
        let hits = Grid::from_vec(rows, cols, (0..rows * cols).collect());
        let flagged = [(flag.0 % rows, flag.1 % cols)];
        let a = render_umatrix(&u, Some(&hits), &flagged, &spec);
        svg_root_ok(&a);
        prop_assert_eq!(a, render_umatrix(&u, Some(&hits), &flagged, &spec));
    }

    #[test]
    fn flowmaps_are_well_formed_and_pure(
        spec in spec_strategy(),
        l in 1usize..9,
        pairs in prop::collection::vec((0u32..9, 0u32..9), 0..80),
    ) {
        let (from, to): (Vec<u32>, Vec<u32>) =
            pairs.iter().map(|&(a, b)| (a % (l as u32 + 1), b % (l as u32 + 1))).unzip();
        let f = FlowMap::from_columns("t", &from, &to, l);
        let tree = LocationTree::new();
        let a = render_flowmap(&f, &tree, &spec);
        svg_root_ok(&a);
        prop_assert_eq!(a, render_flowmap(&f, &tree, &spec));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn generated_data_is_valid(seed in 0u64..10_000, l in 2usize..9, days in 1usize..4) {
        let (d, truth) = generate(&small_config(seed, l, days)).unwrap();
        prop_assert!(validate_dataset(&d).is_empty());
        prop_assert_eq!(truth.objects.len(), d.n_objects());
        prop_assert!(d.n_locations() <= l);
    }

    #[test]
    fn evaluation_is_bit_reproducible(seed in 0u64..1_000) {
        let cfg = small_config(seed, 4, 2);
        let (d, _) = generate(&cfg).unwrap();
        let tom = time_oriented_matrix(&d, &cfg);
        let ec = EvalConfig {
            window: WindowSpec { width: 3, ..WindowSpec::default() },
            rnn: RnnConfig { hidden: 6, epochs: 2, seed, ..RnnConfig::default() },
            seed,
            ..EvalConfig::default()
        };
        let kinds = [ModelKind::Rnn, ModelKind::RandomForest, ModelKind::Uniform];
        let run = || evaluate_over_time(&kinds, &tom, 4, 40, &[300, 600], &ec).unwrap();
        let (a, b) = (run(), run());
        for (x, y) in a.models.iter().zip(&b.models) {
            prop_assert_eq!(x.overall_accuracy.to_bits(), y.overall_accuracy.to_bits());
            for (p, q) in x.curve.iter().zip(&y.curve) {
                prop_assert_eq!(p.accuracy.to_bits(), q.accuracy.to_bits());
            }
        }
    }
}
