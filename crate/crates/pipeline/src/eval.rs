//! Evaluation over the SNR × T60 grid.

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};
use shse_core::metrics::{si_sdr, stoi, MetricReport, UtteranceMetrics};
use shse_core::signal::MultichannelSignal;
use shse_core::spectral::StftProcessor;

use crate::checkpoint::Checkpoint;
use crate::config::ExperimentConfig;
use crate::features::{model_input, utterance_features};
use crate::io::{create_dir, read_jsonl, read_mono, read_multichannel, write_json, write_jsonl};
use crate::mix::{self, PairRecord};
use crate::{Error, Result};

pub const UTTERANCES: &str = "metrics.jsonl";
pub const REPORT: &str = "report.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UtteranceResult {
    pub id: String,
    pub snr_db: f64,
    pub t60: f64,
    pub unprocessed: UtteranceMetrics,
    pub enhanced: Option<UtteranceMetrics>,
}

/// Means over a group of utterances.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub count: usize,
    pub unprocessed_stoi: f64,
    pub unprocessed_si_sdr: f64,
    pub enhanced_stoi: Option<f64>,
    pub enhanced_si_sdr: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellSummary {
    pub snr_db: f64,
    pub t60: f64,
    #[serde(flatten)]
    pub summary: Summary,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RowSummary {
    pub snr_db: f64,
    #[serde(flatten)]
    pub summary: Summary,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub cells: Vec<CellSummary>,
    /// Per-SNR averages over the T60 columns.
    pub rows: Vec<RowSummary>,
    pub overall: Summary,
    #[serde(skip)]
    pub utterances: Vec<UtteranceResult>,
}

fn summarize(results: &[&UtteranceResult]) -> Summary {
    let mut unprocessed = MetricReport::default();
    let mut enhanced = MetricReport::default();
    for r in results {
        unprocessed.push(r.unprocessed.clone());
        if let Some(e) = &r.enhanced {
            enhanced.push(e.clone());
        }
    }
    Summary {
        count: results.len(),
        unprocessed_stoi: unprocessed.mean_stoi().unwrap_or(f64::NAN),
        unprocessed_si_sdr: unprocessed.mean_si_sdr().unwrap_or(f64::NAN),
        enhanced_stoi: enhanced.mean_stoi(),
        enhanced_si_sdr: enhanced.mean_si_sdr(),
    }
}

fn same(a: f64, b: f64) -> bool {
    (a - b).abs() < 1e-9
}

/// Scores every pair of an evaluation dataset, unprocessed (reference
/// microphone of the mixture) and, given a checkpoint, enhanced.
///
/// Every grid cell of `config` must contain at least one pair.
pub fn cmd_eval(
    config: &ExperimentConfig,
    checkpoint: Option<&Path>,
    dataset_dir: &Path,
    out_dir: Option<&Path>,
) -> Result<EvalReport> {
    config.validate()?;
    let manifest = dataset_dir.join(mix::MANIFEST);
    let pairs: Vec<PairRecord> = read_jsonl(&manifest)?;
    if pairs.is_empty() {
        return Err(Error::EmptyEvalSet);
    }
    let model = checkpoint.map(Checkpoint::load).transpose()?;
    let grid = config.eval_cells();
    let rate = config.sample_rate;
    let ref_mic = config.data.reference_mic;

    let mut results = Vec::with_capacity(pairs.len());
    for pair in &pairs {
        let (snr_db, t60) = pair
            .cell
            .ok_or_else(|| Error::manifest(&manifest, format!("{} has no evaluation cell", pair.id)))?;
        if !grid.iter().any(|&(s, t)| same(s, snr_db) && same(t, t60)) {
            return Err(Error::manifest(
                &manifest,
                format!("{} cell ({snr_db}, {t60}) is not on the grid", pair.id),
            ));
        }
        let mixture = read_multichannel(&dataset_dir.join(&pair.mixture), rate, config.room.mics)?;
        let target = read_mono(&dataset_dir.join(&pair.target), rate)?;
        let noisy = mixture.channel(ref_mic);
        let unprocessed = UtteranceMetrics {
            id: pair.id.clone(),
            stoi: stoi(&target, noisy, rate)?,
            si_sdr: si_sdr(&target, noisy)?,
        };
        let enhanced = match &model {
            Some(ck) => {
                let estimate = enhance(ck, &mixture)?;
                Some(UtteranceMetrics {
                    id: pair.id.clone(),
                    stoi: stoi(&target, &estimate, rate)?,
                    si_sdr: si_sdr(&target, &estimate)?,
                })
            }
            None => None,
        };
        results.push(UtteranceResult {
            id: pair.id.clone(),
            snr_db,
            t60,
            unprocessed,
            enhanced,
        });
    }

    let mut cells = Vec::with_capacity(grid.len());
    let mut missing = Vec::new();
    for &(snr_db, t60) in &grid {
        let members: Vec<&UtteranceResult> = results
            .iter()
            .filter(|r| same(r.snr_db, snr_db) && same(r.t60, t60))
            .collect();
        if members.is_empty() {
            missing.push((snr_db, t60));
            continue;
        }
        cells.push(CellSummary {
            snr_db,
            t60,
            summary: summarize(&members),
        });
    }
    if !missing.is_empty() {
        return Err(Error::MissingCells(missing));
    }
    let rows = config
        .data
        .eval_snr
        .iter()
        .map(|&snr_db| {
            let in_row: Vec<&CellSummary> = cells.iter().filter(|c| same(c.snr_db, snr_db)).collect();
            RowSummary {
                snr_db,
                summary: average_cells(&in_row),
            }
        })
        .collect();
    let all: Vec<&UtteranceResult> = results.iter().collect();
    let report = EvalReport {
        cells,
        rows,
        overall: summarize(&all),
        utterances: results,
    };
    if let Some(dir) = out_dir {
        create_dir(dir)?;
        write_jsonl(&dir.join(UTTERANCES), &report.utterances)?;
        write_json(&dir.join(REPORT), &report)?;
    }
    Ok(report)
}

/// Unweighted mean over cells, as in a table's row average.
fn average_cells(cells: &[&CellSummary]) -> Summary {
    let n = cells.len() as f64;
    let avg = |f: &dyn Fn(&Summary) -> f64| cells.iter().map(|c| f(&c.summary)).sum::<f64>() / n;
    let avg_opt = |f: &dyn Fn(&Summary) -> Option<f64>| -> Option<f64> {
        let v: Option<Vec<f64>> = cells.iter().map(|c| f(&c.summary)).collect();
        v.map(|v| v.iter().sum::<f64>() / n)
    };
    Summary {
        count: cells.iter().map(|c| c.summary.count).sum(),
        unprocessed_stoi: avg(&|s| s.unprocessed_stoi),
        unprocessed_si_sdr: avg(&|s| s.unprocessed_si_sdr),
        enhanced_stoi: avg_opt(&|s| s.enhanced_stoi),
        enhanced_si_sdr: avg_opt(&|s| s.enhanced_si_sdr),
    }
}

/// Enhanced reference-channel waveform, zero-padded to the mixture length.
pub fn enhance(ck: &Checkpoint, mixture: &MultichannelSignal) -> Result<Vec<f64>> {
    let config = &ck.config;
    let feats = utterance_features(config, mixture)?;
    let input = model_input(feats.stft, feats.sht, config.model.variant)?;
    let spec = ck.model.enhance(&input)?;
    let processor = StftProcessor::new(config.stft())?;
    let mut y = processor.istft(&spec)?.into_channels().remove(0);
    y.resize(mixture.len(), 0.0);
    Ok(y)
}

/// Text table of STOI (×100) per cell with row averages.
pub fn format_table(report: &EvalReport, t60s: &[f64]) -> String {
    let mut out = String::new();
    let _ = write!(out, "{:>8} {:>11}", "SNR dB", "");
    for t in t60s {
        let _ = write!(out, " {:>7}", format!("{t:.1}s"));
    }
    let _ = writeln!(out, " {:>7}", "avg");
    for row in &report.rows {
        let cells: Vec<&CellSummary> = report.cells.iter().filter(|c| same(c.snr_db, row.snr_db)).collect();
        let lines: [(&str, Box<dyn Fn(&Summary) -> Option<f64>>); 2] = [
            ("unprocessed", Box::new(|s: &Summary| Some(s.unprocessed_stoi))),
            ("enhanced", Box::new(|s: &Summary| s.enhanced_stoi)),
        ];
        for (label, get) in lines {
            if get(&row.summary).is_none() {
                continue;
            }
            let _ = write!(out, "{:>8} {:>11}", row.snr_db, label);
            for c in &cells {
                let _ = write!(out, " {:>7.2}", 100.0 * get(&c.summary).unwrap_or(f64::NAN));
            }
            let _ = writeln!(out, " {:>7.2}", 100.0 * get(&row.summary).unwrap_or(f64::NAN));
        }
    }
    out
}
