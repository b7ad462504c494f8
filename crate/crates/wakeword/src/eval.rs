//! FRR / FAH scoring and DET operating-point sweeps.
//!
//! Scoring is at the utterance level: a positive utterance counts as
//! detected only if its own wake word fires anywhere inside it; any other
//! wake word firing (in a positive or a negative utterance) is a false
//! alarm. FAH divides false alarms by hours of *negative* audio only.

use ndarray::Array2;

use crate::corpus::UtteranceLabel;
use crate::decoder::{DecoderConfig, OnlineDecoder};
use crate::graphs::{build_decoding_graph, HmmTopology};
use crate::par;
use crate::{Error, Result};

/// Per-utterance decoding outcome fed into [`evaluate`].
#[derive(Debug, Clone)]
pub struct UttDetections {
    pub utt_id: String,
    pub label: UtteranceLabel,
    pub duration_s: f64,
    /// Wake-word indices detected anywhere in the utterance.
    pub detected: Vec<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvalResult {
    pub frr_percent: f64,
    pub fah_per_hour: f64,
    pub num_positives: usize,
    pub num_missed: usize,
    pub num_false_alarms: usize,
    pub negative_hours: f64,
}

pub fn evaluate(dets: &[UttDetections]) -> Result<EvalResult> {
    let mut num_positives = 0usize;
    let mut num_missed = 0usize;
    let mut num_false_alarms = 0usize;
    let mut negative_secs = 0.0f64;
    for d in dets {
        match d.label {
            UtteranceLabel::Positive(k) => {
                num_positives += 1;
                if !d.detected.contains(&k) {
                    num_missed += 1;
                }
                // other wake words firing inside a positive utterance are
                // treated as negatives (i.e. false alarms)
                num_false_alarms += d.detected.iter().filter(|&&w| w != k).count();
            }
            UtteranceLabel::Negative => {
                negative_secs += d.duration_s;
                num_false_alarms += d.detected.len();
            }
        }
    }
    if num_positives == 0 {
        return Err(Error::Eval("no positive utterances to score".into()));
    }
    let negative_hours = negative_secs / 3600.0;
    if negative_hours <= 0.0 {
        return Err(Error::Eval("no negative audio to score".into()));
    }
    Ok(EvalResult {
        frr_percent: 100.0 * num_missed as f64 / num_positives as f64,
        fah_per_hour: num_false_alarms as f64 / negative_hours,
        num_positives,
        num_missed,
        num_false_alarms,
        negative_hours,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DetPoint {
    pub positive_cost: f64,
    pub frr_percent: f64,
    pub fah_per_hour: f64,
}

/// One utterance's metadata plus its acoustic score matrix (subsampled
/// frames x PdfIds, log-probs), precomputed once so a sweep re-decodes
/// without re-running the acoustic model.
pub struct ScoredUtt {
    pub utt_id: String,
    pub label: UtteranceLabel,
    pub duration_s: f64,
    pub scores: Array2<f64>,
}

/// Decode every utterance against one decoding graph and collect the wake
/// words fired per utterance.
pub fn decode_all(
    utts: &[ScoredUtt],
    topo: &HmmTopology,
    dec_cfg: &DecoderConfig,
    positive_cost: f64,
) -> Result<Vec<UttDetections>> {
    let graph = build_decoding_graph(topo, positive_cost)?;
    let num_wake = topo.inventory.num_wake_words;
    let results = par::map_slice(utts, |u| -> Result<UttDetections> {
        let mut dec = OnlineDecoder::new(&graph, dec_cfg.clone())?;
        let mut events = dec.process_chunk(u.scores.view())?;
        let (tail, _) = dec.finish();
        events.extend(tail);
        let detected = events
            .iter()
            .filter(|e| e.word < num_wake)
            .map(|e| e.word)
            .collect();
        Ok(UttDetections {
            utt_id: u.utt_id.clone(),
            label: u.label,
            duration_s: u.duration_s,
            detected,
        })
    });
    results.into_iter().collect()
}

/// One full decode pass per cost; points come back sorted by FAH (ties by
/// cost) with the raw, un-enveloped rates.
pub fn det_sweep(
    utts: &[ScoredUtt],
    topo: &HmmTopology,
    dec_cfg: &DecoderConfig,
    cost_grid: &[f64],
) -> Result<Vec<DetPoint>> {
    if cost_grid.is_empty() {
        return Err(Error::Eval("empty cost grid".into()));
    }
    let mut points = Vec::with_capacity(cost_grid.len());
    for &cost in cost_grid {
        let dets = decode_all(utts, topo, dec_cfg, cost)
            .map_err(|e| Error::Eval(format!("decode failed at cost {cost}: {e}")))?;
        let r = evaluate(&dets)?;
        points.push(DetPoint {
            positive_cost: cost,
            frr_percent: r.frr_percent,
            fah_per_hour: r.fah_per_hour,
        });
    }
    points.sort_by(|a, b| {
        a.fah_per_hour
            .partial_cmp(&b.fah_per_hour)
            .unwrap()
            .then(a.positive_cost.partial_cmp(&b.positive_cost).unwrap())
    });
    Ok(points)
}

/// Monotone lower envelope of a DET curve: with points sorted by FAH, the
/// reported FRR at each point is the minimum FRR seen at equal or lower FAH,
/// so FRR is non-increasing as FAH grows.
pub fn monotone_envelope(points: &[DetPoint]) -> Vec<DetPoint> {
    let mut sorted: Vec<DetPoint> = points.to_vec();
    sorted.sort_by(|a, b| a.fah_per_hour.partial_cmp(&b.fah_per_hour).unwrap());
    let mut best = f64::INFINITY;
    for p in &mut sorted {
        best = best.min(p.frr_percent);
        p.frr_percent = best;
    }
    sorted
}

/// Best FRR among points with FAH at or below the budget.
pub fn frr_at_fah(points: &[DetPoint], max_fah: f64) -> Option<f64> {
    points
        .iter()
        .filter(|p| p.fah_per_hour <= max_fah)
        .map(|p| p.frr_percent)
        .fold(None, |acc, v| Some(acc.map_or(v, |a: f64| a.min(v))))
}

pub fn det_csv(points: &[DetPoint]) -> String {
    let mut out = String::from("cost,frr_percent,fah_per_hour\n");
    for p in points {
        out.push_str(&format!(
            "{},{},{}\n",
            p.positive_cost, p.frr_percent, p.fah_per_hour
        ));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graphs::{build_topology, PhoneInventory};
    use rand::{RngExt, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn det(label: UtteranceLabel, dur: f64, detected: Vec<usize>) -> UttDetections {
        UttDetections {
            utt_id: format!("u{}", detected.len()),
            label,
            duration_s: dur,
            detected,
        }
    }

    #[test]
    fn all_hit_no_alarms() {
        let mut dets: Vec<_> = (0..100)
            .map(|_| det(UtteranceLabel::Positive(0), 2.0, vec![0]))
            .collect();
        dets.push(det(UtteranceLabel::Negative, 7200.0, vec![]));
        let r = evaluate(&dets).unwrap();
        assert_eq!(r.frr_percent, 0.0);
        assert_eq!(r.fah_per_hour, 0.0);
        assert!((r.negative_hours - 2.0).abs() < 1e-12);
    }

    #[test]
    fn one_miss_of_hundred() {
        let mut dets: Vec<_> = (0..99)
            .map(|_| det(UtteranceLabel::Positive(0), 2.0, vec![0]))
            .collect();
        dets.push(det(UtteranceLabel::Positive(0), 2.0, vec![]));
        dets.push(det(UtteranceLabel::Negative, 3600.0, vec![]));
        let r = evaluate(&dets).unwrap();
        assert!((r.frr_percent - 1.0).abs() < 1e-12);
    }

    #[test]
    fn three_alarms_over_two_hours() {
        let dets = vec![
            det(UtteranceLabel::Positive(0), 2.0, vec![0]),
            det(UtteranceLabel::Negative, 3600.0, vec![0, 0]),
            det(UtteranceLabel::Negative, 3600.0, vec![0]),
        ];
        let r = evaluate(&dets).unwrap();
        assert!((r.fah_per_hour - 1.5).abs() < 1e-12);
    }

    #[test]
    fn wrong_wake_word_is_negative() {
        // positive for word 1, but word 0 fires: miss + false alarm
        let dets = vec![
            det(UtteranceLabel::Positive(1), 2.0, vec![0]),
            det(UtteranceLabel::Negative, 3600.0, vec![]),
        ];
        let r = evaluate(&dets).unwrap();
        assert_eq!(r.num_missed, 1);
        assert_eq!(r.num_false_alarms, 1);
    }

    #[test]
    fn permutation_invariant() {
        let mut dets = vec![
            det(UtteranceLabel::Positive(0), 2.0, vec![0]),
            det(UtteranceLabel::Positive(0), 2.0, vec![]),
            det(UtteranceLabel::Negative, 1800.0, vec![0]),
            det(UtteranceLabel::Negative, 1800.0, vec![]),
        ];
        let a = evaluate(&dets).unwrap();
        dets.reverse();
        let b = evaluate(&dets).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn degenerate_inputs_error() {
        assert!(evaluate(&[det(UtteranceLabel::Negative, 100.0, vec![])]).is_err());
        assert!(evaluate(&[det(UtteranceLabel::Positive(0), 2.0, vec![0])]).is_err());
    }

    #[test]
    fn envelope_non_increasing_and_tight() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let points: Vec<DetPoint> = (0..40)
            .map(|i| DetPoint {
                positive_cost: i as f64,
                frr_percent: rng.random_range(0.0..100.0),
                fah_per_hour: rng.random_range(0.0..10.0),
            })
            .collect();
        let env = monotone_envelope(&points);
        for w in env.windows(2) {
            assert!(w[0].fah_per_hour <= w[1].fah_per_hour);
            assert!(w[0].frr_percent >= w[1].frr_percent);
        }
        // oracle: envelope frr at each point equals the running minimum of
        // raw frr over points with fah <= this point's fah
        for e in &env {
            let oracle = points
                .iter()
                .filter(|p| p.fah_per_hour <= e.fah_per_hour)
                .map(|p| p.frr_percent)
                .fold(f64::INFINITY, f64::min);
            assert!((e.frr_percent - oracle).abs() < 1e-12);
        }
    }

    #[test]
    fn sweep_single_cost_matches_evaluate() {
        let inv = PhoneInventory::new(1).unwrap();
        let topo = build_topology(&inv, 2, 1).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut utts = Vec::new();
        for i in 0..6 {
            let label = if i < 2 {
                UtteranceLabel::Positive(0)
            } else {
                UtteranceLabel::Negative
            };
            utts.push(ScoredUtt {
                utt_id: format!("u{i}"),
                label,
                duration_s: 2.0,
                scores: Array2::from_shape_fn((20, topo.num_pdfs()), |_| {
                    rng.random_range(-4.0..0.0)
                }),
            });
        }
        let cfg = DecoderConfig::default();
        let points = det_sweep(&utts, &topo, &cfg, &[1.0]).unwrap();
        assert_eq!(points.len(), 1);
        let dets = decode_all(&utts, &topo, &cfg, 1.0).unwrap();
        let r = evaluate(&dets).unwrap();
        assert_eq!(points[0].frr_percent, r.frr_percent);
        assert_eq!(points[0].fah_per_hour, r.fah_per_hour);
        // finer grid only adds points; the shared cost is identical
        let finer = det_sweep(&utts, &topo, &cfg, &[-2.0, 1.0, 4.0]).unwrap();
        assert_eq!(finer.len(), 3);
        let shared = finer
            .iter()
            .find(|p| p.positive_cost == 1.0)
            .expect("shared cost present");
        assert_eq!(shared.frr_percent, points[0].frr_percent);
        assert_eq!(shared.fah_per_hour, points[0].fah_per_hour);
    }
}
