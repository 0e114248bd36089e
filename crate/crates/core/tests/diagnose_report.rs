use std::fs;

use trace_core::corpusgen::{AnnotatedSentence, CorpusConfig};
use trace_core::diagnose::{stratified_accuracy, stratify, Granularity};
use trace_core::model::{Batch, DecoderModel, Tokenizer, TransformerConfig, EOS};
use trace_core::report::{render_run, render_svg, CsvLog, Series};
use trace_core::trainer::fixed_batches;

fn fixture(n: usize) -> (Vec<AnnotatedSentence>, Tokenizer, Vec<Batch>) {
    let c = CorpusConfig::default().generate(Some(n), Some(8)).unwrap();
    let tok = Tokenizer::build(&c.sentences).unwrap();
    let idx: Vec<usize> = (0..n).collect();
    let batches = fixed_batches(&tok, &c.sentences, &idx, 16, 16).unwrap();
    (c.sentences, tok, batches)
}

/// Predictions that copy the target except at the given sentence-token
/// positions, which get `EOS`.
fn scripted(batches: &[Batch], wrong: impl Fn(usize, usize) -> bool) -> Vec<Vec<usize>> {
    batches
        .iter()
        .map(|b| {
            let mut p = b.targets.clone();
            for r in 0..b.rows {
                for t in 0..b.lengths[r] {
                    if wrong(b.sentence_ids[r], t) {
                        p[r * b.len + t] = EOS;
                    }
                }
            }
            p
        })
        .collect()
}

#[test]
fn perfect_predictions_score_one_everywhere() {
    let (s, tok, b) = fixture(60);
    let rep = stratify(&scripted(&b, |_, _| false), &b, &s, &tok, Granularity::Detailed, 1).unwrap();
    let tokens: usize = s.iter().map(|x| x.len()).sum();
    assert_eq!(rep.evaluated, tokens);
    assert_eq!(rep.misalignment.exact, tokens);
    for st in rep.pos.values().chain(rep.roles.values()).filter(|st| st.count > 0) {
        assert_eq!(st.accuracy(), Some(1.0));
    }
}

#[test]
fn counts_are_conserved_and_match_hand_tallies() {
    let (s, tok, b) = fixture(80);
    // Every first token is wrong.
    let preds = scripted(&b, |_, t| t == 0);
    for gran in [Granularity::Detailed, Granularity::Coarse] {
        let rep = stratify(&preds, &b, &s, &tok, gran, 2).unwrap();
        let pos_total: usize = rep.pos.values().map(|x| x.count).sum();
        assert_eq!(pos_total, rep.evaluated);
        assert_eq!(rep.misalignment.total(), rep.evaluated);
        let roles: usize = s.iter().map(|x| x.roles.len()).sum();
        assert_eq!(rep.roles.values().map(|x| x.count).sum::<usize>(), roles);
        assert_eq!(rep.misalignment.type_wrong, s.len());
        assert_eq!(rep.misalignment.exact, rep.evaluated - s.len());
        let first_role_wrong = s.iter().filter(|x| x.role_at(0).is_some()).count();
        let role_correct: usize = rep.roles.values().map(|x| x.correct).sum();
        assert_eq!(role_correct, roles - first_role_wrong);
    }
}

#[test]
fn misaligned_annotations_are_data_errors() {
    let (mut s, tok, b) = fixture(20);
    let target = b[0].sentence_ids[0];
    s[target].pos_tags.pop();
    let err = stratify(&scripted(&b, |_, _| false), &b, &s, &tok, Granularity::Detailed, 0).unwrap_err();
    assert!(matches!(err, trace_core::Error::Data(_)));
    assert!(err.to_string().contains(&format!("sentence {target}")), "{err}");
}

#[test]
fn model_predictions_are_stratified_consistently() {
    let (s, tok, b) = fixture(40);
    let cfg = TransformerConfig {
        d_model: 8,
        num_heads: 2,
        d_ff: 16,
        ..TransformerConfig::default()
    };
    let model = DecoderModel::new(cfg, tok.len(), 4).unwrap();
    let a = stratified_accuracy(&model, &b, &s, &tok, Granularity::Coarse, 7).unwrap();
    let again = stratified_accuracy(&model, &b, &s, &tok, Granularity::Coarse, 7).unwrap();
    assert_eq!(a, again);
    assert_eq!(a.roles.keys().cloned().collect::<Vec<_>>(), ["adjunct", "core"]);
}

#[test]
fn svg_is_deterministic_with_one_polyline_per_series() {
    let series: Vec<Series> = (0..3)
        .map(|k| Series {
            label: format!("s{k}"),
            points: (0..10).map(|i| (i as f64, (i * k) as f64)).collect(),
        })
        .collect();
    let a = render_svg("t", "step", &series);
    assert_eq!(a, render_svg("t", "step", &series));
    assert_eq!(a.matches("<polyline").count(), 3);
    assert!(a.starts_with("<svg") || a.starts_with("<?xml"));
}

#[test]
fn render_run_skips_empty_series() {
    let dir = tempfile::tempdir().unwrap();
    let m = dir.path().join("metrics");
    let mut log = CsvLog::create(&m.join("intdim.csv"), &["step", "layer", "method", "estimate", "count"]).unwrap();
    log.append(&["500", "0", "TwoNN", "3.5", "100"]).unwrap();
    log.append(&["1000", "0", "TwoNN", "4.0", "100"]).unwrap();
    log.append(&["500", "1", "TwoNN", "", "100"]).unwrap();
    drop(log);
    let out = render_run(dir.path()).unwrap();
    assert_eq!(out.charts.len(), 1);
    assert_eq!(out.warnings.len(), 1, "{:?}", out.warnings);
    let svg = fs::read_to_string(&out.charts[0]).unwrap();
    assert_eq!(svg.matches("<polyline").count(), 1);
    let again = render_run(dir.path()).unwrap();
    assert_eq!(fs::read_to_string(&again.charts[0]).unwrap(), svg);
}
