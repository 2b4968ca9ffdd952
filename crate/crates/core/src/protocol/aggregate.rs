//! Table-style aggregation: winners, significance daggers and relative loss.

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{welch_t_test, ProtocolError, SelectionMode};

/// Published peek-selected summary (SFNN, DUET, iTransformer on seven
/// datasets × four horizons), with the published winner/dagger markers.
pub const PUBLISHED_PEEK_CSV: &str = include_str!("../../data/published_peek.csv");
/// Published validation-selected summary, same layout.
pub const PUBLISHED_FAIR_CSV: &str = include_str!("../../data/published_fair.csv");

/// Significance level for the dagger marker.
pub const SIGNIFICANCE_LEVEL: f64 = 0.05;

/// Mean and spread of one model on one (dataset, horizon) cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellResult {
    pub model: String,
    pub dataset: String,
    pub horizon: usize,
    pub mean: f64,
    pub std: f64,
    pub n: usize,
    #[serde(default)]
    pub lookback: Option<usize>,
    #[serde(default)]
    pub mode: Option<SelectionMode>,
    /// Winner marker as published, when the row comes from a published table.
    #[serde(default)]
    pub published_best: Option<bool>,
    #[serde(default)]
    pub published_significant: Option<bool>,
}

/// Parses `model,dataset,horizon,mean,std,n[,published_best,published_significant]`.
pub fn parse_summary_csv(text: &str) -> Result<Vec<CellResult>, ProtocolError> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .flexible(true)
        .from_reader(text.as_bytes());
    let mut out = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| ProtocolError::Parse(e.to_string()))?;
        let row = i + 1;
        if rec.len() != 6 && rec.len() != 8 {
            return Err(ProtocolError::Parse(format!(
                "summary row {row}: expected 6 or 8 fields, found {}",
                rec.len()
            )));
        }
        let num = |j: usize| -> Result<f64, ProtocolError> {
            rec[j]
                .parse::<f64>()
                .map_err(|_| ProtocolError::Parse(format!("summary row {row}: bad number '{}'", &rec[j])))
        };
        let int = |j: usize| -> Result<usize, ProtocolError> {
            rec[j]
                .parse::<usize>()
                .map_err(|_| ProtocolError::Parse(format!("summary row {row}: bad count '{}'", &rec[j])))
        };
        let flag = |j: usize| -> Result<Option<bool>, ProtocolError> {
            if rec.len() <= j {
                return Ok(None);
            }
            match &rec[j] {
                "1" | "true" => Ok(Some(true)),
                "0" | "false" => Ok(Some(false)),
                "" => Ok(None),
                v => Err(ProtocolError::Parse(format!("summary row {row}: bad flag '{v}'"))),
            }
        };
        out.push(CellResult {
            model: rec[0].to_owned(),
            dataset: rec[1].to_owned(),
            horizon: int(2)?,
            mean: num(3)?,
            std: num(4)?,
            n: int(5)?,
            lookback: None,
            mode: None,
            published_best: flag(6)?,
            published_significant: flag(7)?,
        });
    }
    Ok(out)
}

pub fn load_summary_csv(path: &Path) -> Result<Vec<CellResult>, ProtocolError> {
    let text = std::fs::read_to_string(path).map_err(|e| ProtocolError::io(path, e))?;
    parse_summary_csv(&text)
}

/// Outcome of one (dataset, horizon) cell. `entries` follow model order.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CellOutcome {
    pub dataset: String,
    pub horizon: usize,
    pub entries: Vec<CellResult>,
    pub winner: usize,
    pub runner_up: Option<usize>,
    /// Welch p-value of winner versus runner-up.
    pub p_value: Option<f64>,
    pub significant: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ModelAggregate {
    pub model: String,
    pub first_count: usize,
    pub significant_first_count: usize,
    pub avg_relative_loss: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchmarkSummary {
    pub models: Vec<String>,
    pub reference: String,
    pub cells: Vec<CellOutcome>,
    pub aggregates: Vec<ModelAggregate>,
}

/// A cell whose computed winner or dagger differs from the published marker.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MarkerDiscrepancy {
    pub dataset: String,
    pub horizon: usize,
    pub model: String,
    pub field: &'static str,
    pub published: bool,
    pub computed: bool,
}

/// Aggregates per-model cell results.
///
/// Models are ordered by first appearance, which also breaks ties in mean
/// MSE (the earlier model wins). A winner is significant when its Welch
/// p-value against the runner-up is below 5%.
pub fn aggregate_table(
    cells: &[CellResult],
    reference: &str,
) -> Result<BenchmarkSummary, ProtocolError> {
    let mut models: Vec<String> = Vec::new();
    let mut keys: Vec<(String, usize)> = Vec::new();
    for c in cells {
        if !models.contains(&c.model) {
            models.push(c.model.clone());
        }
        let k = (c.dataset.clone(), c.horizon);
        if !keys.contains(&k) {
            keys.push(k);
        }
    }
    if !models.iter().any(|m| m == reference) {
        return Err(ProtocolError::InvalidInput(format!(
            "reference model '{reference}' not among {models:?}"
        )));
    }
    let ref_idx = models.iter().position(|m| m == reference).unwrap();

    let mut outcomes = Vec::with_capacity(keys.len());
    let mut first = vec![0usize; models.len()];
    let mut sig_first = vec![0usize; models.len()];
    let mut rel_sum = vec![0.0f64; models.len()];
    for (dataset, horizon) in keys {
        let mut entries = Vec::with_capacity(models.len());
        for m in &models {
            let found = cells
                .iter()
                .find(|c| &c.model == m && c.dataset == dataset && c.horizon == horizon)
                .ok_or_else(|| ProtocolError::MissingCell {
                    model: m.clone(),
                    dataset: dataset.clone(),
                    horizon,
                })?;
            entries.push(found.clone());
        }
        let mut order: Vec<usize> = (0..entries.len()).collect();
        order.sort_by(|&a, &b| entries[a].mean.total_cmp(&entries[b].mean).then(a.cmp(&b)));
        let winner = order[0];
        let runner_up = order.get(1).copied();
        let p_value = runner_up.map(|r| {
            let (w, r) = (&entries[winner], &entries[r]);
            match welch_t_test(w.mean, w.std, w.n, r.mean, r.std, r.n) {
                Ok(res) => res.p_two_sided,
                Err(_) => 1.0,
            }
        });
        let significant = p_value.is_some_and(|p| p < SIGNIFICANCE_LEVEL);
        first[winner] += 1;
        if significant {
            sig_first[winner] += 1;
        }
        let reference_mean = entries[ref_idx].mean;
        for (i, e) in entries.iter().enumerate() {
            rel_sum[i] += e.mean / reference_mean;
        }
        outcomes.push(CellOutcome {
            dataset,
            horizon,
            entries,
            winner,
            runner_up,
            p_value,
            significant,
        });
    }
    let n_cells = outcomes.len() as f64;
    let aggregates = models
        .iter()
        .enumerate()
        .map(|(i, m)| ModelAggregate {
            model: m.clone(),
            first_count: first[i],
            significant_first_count: sig_first[i],
            avg_relative_loss: rel_sum[i] / n_cells,
        })
        .collect();
    Ok(BenchmarkSummary {
        models,
        reference: reference.to_owned(),
        cells: outcomes,
        aggregates,
    })
}

impl BenchmarkSummary {
    pub fn aggregate(&self, model: &str) -> Option<&ModelAggregate> {
        self.aggregates.iter().find(|a| a.model == model)
    }

    pub fn first_counts(&self) -> Vec<usize> {
        self.aggregates.iter().map(|a| a.first_count).collect()
    }

    pub fn significant_counts(&self) -> Vec<usize> {
        self.aggregates.iter().map(|a| a.significant_first_count).collect()
    }

    /// Cells where published winner or dagger markers disagree with ours.
    pub fn marker_discrepancies(&self) -> Vec<MarkerDiscrepancy> {
        let mut out = Vec::new();
        for cell in &self.cells {
            for (i, e) in cell.entries.iter().enumerate() {
                let is_winner = i == cell.winner;
                if let Some(pb) = e.published_best {
                    if pb != is_winner {
                        out.push(MarkerDiscrepancy {
                            dataset: cell.dataset.clone(),
                            horizon: cell.horizon,
                            model: e.model.clone(),
                            field: "best",
                            published: pb,
                            computed: is_winner,
                        });
                    }
                }
                if let Some(ps) = e.published_significant {
                    let computed = is_winner && cell.significant;
                    if ps != computed {
                        out.push(MarkerDiscrepancy {
                            dataset: cell.dataset.clone(),
                            horizon: cell.horizon,
                            model: e.model.clone(),
                            field: "significant",
                            published: ps,
                            computed,
                        });
                    }
                }
            }
        }
        out
    }

    /// Aligned markdown table: `mean ± std` per model, `*` on the winner and
    /// `†` when the win is significant, then the three footer rows.
    pub fn to_markdown(&self) -> String {
        let mut header = vec!["Dataset".to_owned(), "Horizon".to_owned()];
        header.extend(self.models.iter().cloned());
        let mut rows: Vec<Vec<String>> = Vec::new();
        for c in &self.cells {
            let mut row = vec![c.dataset.clone(), c.horizon.to_string()];
            for (i, e) in c.entries.iter().enumerate() {
                let mark = match (i == c.winner, c.significant) {
                    (true, true) => "*†",
                    (true, false) => "*",
                    _ => "",
                };
                let lb = e.lookback.map(|l| format!(" (L={l})")).unwrap_or_default();
                row.push(format!("{:.4}{mark} ± {:.4}{lb}", e.mean, e.std));
            }
            rows.push(row);
        }
        let footer = |label: &str, f: &dyn Fn(&ModelAggregate) -> String| {
            let mut row = vec![label.to_owned(), String::new()];
            row.extend(self.aggregates.iter().map(f));
            row
        };
        rows.push(footer("1st count", &|a| a.first_count.to_string()));
        rows.push(footer("1st count with p < 5%", &|a| a.significant_first_count.to_string()));
        rows.push(footer(&format!("Avg. loss rel. to {}", self.reference), &|a| {
            format!("{:.3}", a.avg_relative_loss)
        }));

        let widths: Vec<usize> = (0..header.len())
            .map(|j| {
                rows.iter()
                    .map(|r| r[j].chars().count())
                    .chain(std::iter::once(header[j].chars().count()))
                    .max()
                    .unwrap()
            })
            .collect();
        let line = |cells: &[String]| {
            let mut s = String::from("|");
            for (j, c) in cells.iter().enumerate() {
                let pad = widths[j] - c.chars().count();
                if j >= 1 {
                    let _ = write!(s, " {}{} |", " ".repeat(pad), c);
                } else {
                    let _ = write!(s, " {}{} |", c, " ".repeat(pad));
                }
            }
            s.push('\n');
            s
        };
        let mut out = line(&header);
        out.push('|');
        for (j, w) in widths.iter().enumerate() {
            if j == 0 {
                let _ = write!(out, ":{}|", "-".repeat(w + 1));
            } else {
                let _ = write!(out, "{}:|", "-".repeat(w + 1));
            }
        }
        out.push('\n');
        let n_cells = self.cells.len();
        for (i, r) in rows.iter().enumerate() {
            if i == n_cells {
                out.push('|');
                for w in &widths {
                    let _ = write!(out, "{}|", "-".repeat(w + 2));
                }
                out.push('\n');
            }
            out.push_str(&line(r));
        }
        out
    }

    /// One row per (cell, model) plus aggregate rows.
    pub fn to_csv(&self) -> String {
        let mut out = String::from(
            "dataset,horizon,model,mean,std,n,lookback,mode,winner,significant,p_value\n",
        );
        for c in &self.cells {
            for (i, e) in c.entries.iter().enumerate() {
                let _ = writeln!(
                    out,
                    "{},{},{},{},{},{},{},{},{},{},{}",
                    c.dataset,
                    c.horizon,
                    e.model,
                    e.mean,
                    e.std,
                    e.n,
                    e.lookback.map(|l| l.to_string()).unwrap_or_default(),
                    e.mode.map(|m| m.to_string()).unwrap_or_default(),
                    u8::from(i == c.winner),
                    u8::from(i == c.winner && c.significant),
                    if i == c.winner {
                        c.p_value.map(|p| format!("{p:.6e}")).unwrap_or_default()
                    } else {
                        String::new()
                    }
                );
            }
        }
        out.push_str("\nmodel,first_count,significant_first_count,avg_relative_loss\n");
        for a in &self.aggregates {
            let _ = writeln!(
                out,
                "{},{},{},{:.6}",
                a.model, a.first_count, a.significant_first_count, a.avg_relative_loss
            );
        }
        out
    }
}
