//! Per-episode CSV and run manifest.

use std::fs;
use std::path::{Path, PathBuf};

use super::run::{EpisodeLog, RegretReport};
use super::HarnessError;

pub const CSV_NAME: &str = "episodes.csv";
pub const MANIFEST_NAME: &str = "manifest.txt";

fn io_error(path: &Path) -> impl FnOnce(std::io::Error) -> HarnessError + '_ {
    move |source| HarnessError::Io {
        path: path.display().to_string(),
        source,
    }
}

fn header(d: usize, convex: bool) -> Vec<String> {
    let mut cols = vec!["episode".to_string(), "exp_reward".to_string()];
    cols.extend((0..d).map(|i| format!("exp_cons_{i}")));
    cols.push("realized_reward".into());
    cols.extend((0..d).map(|i| format!("realized_cons_{i}")));
    cols.extend((0..d).map(|i| format!("cum_cons_{i}")));
    cols.push("rew_reg".into());
    cols.push("cons_reg".into());
    if convex {
        cols.push("convex_rew_reg".into());
        cols.push("convex_cons_reg".into());
    }
    cols.push("planner_status".into());
    cols
}

/// Writes `episodes.csv` and `manifest.txt` into `out_dir` (created if
/// missing) and returns their paths. Wall time is left out so that equal
/// seeds give byte-identical files.
pub fn write_reports(
    logs: &[EpisodeLog],
    report: &RegretReport,
    manifest: &str,
    out_dir: &Path,
) -> Result<Vec<PathBuf>, HarnessError> {
    fs::create_dir_all(out_dir).map_err(io_error(out_dir))?;
    let csv_path = out_dir.join(CSV_NAME);
    let file = fs::File::create(&csv_path).map_err(io_error(&csv_path))?;
    let mut writer = csv::Writer::from_writer(file);
    let d = report.num_resources();
    writer.write_record(header(d, report.convex.is_some()))?;
    for (idx, log) in logs.iter().enumerate() {
        let mut row = vec![log.episode.to_string(), log.exp_reward.to_string()];
        row.extend(log.exp_consumption.iter().map(|c| c.to_string()));
        row.push(log.realized_reward.to_string());
        row.extend(log.realized_consumption.iter().map(|c| c.to_string()));
        row.extend(report.cum_consumption[idx].iter().map(|c| c.to_string()));
        row.push(report.rew_reg[idx].to_string());
        row.push(report.cons_reg[idx].to_string());
        if let Some(cx) = &report.convex {
            row.push(cx.rew_reg[idx].to_string());
            row.push(cx.cons_reg[idx].to_string());
        }
        row.push(log.planner_status.clone());
        writer.write_record(&row)?;
    }
    writer.flush().map_err(io_error(&csv_path))?;

    let manifest_path = out_dir.join(MANIFEST_NAME);
    fs::write(&manifest_path, manifest).map_err(io_error(&manifest_path))?;
    Ok(vec![csv_path, manifest_path])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::{run_experiment, EnvKind, ExperimentConfig, PlannerKind};

    #[test]
    fn identical_seeds_identical_files() {
        let cfg = ExperimentConfig {
            env: EnvKind::Random,
            horizon: 3,
            random_states: 3,
            random_actions: 2,
            episodes: 4,
            seed: 3,
            planner: PlannerKind::Lp,
            ..Default::default()
        };
        let dir = tempfile::tempdir().unwrap();
        let a = run_experiment(&cfg).unwrap();
        let b = run_experiment(&cfg).unwrap();
        let pa = write_reports(&a.logs, &a.report, &a.manifest, &dir.path().join("a")).unwrap();
        let pb = write_reports(&b.logs, &b.report, &b.manifest, &dir.path().join("b")).unwrap();
        for (x, y) in pa.iter().zip(&pb) {
            assert_eq!(fs::read(x).unwrap(), fs::read(y).unwrap());
        }
        let text = fs::read_to_string(&pa[0]).unwrap();
        let mut lines = text.lines();
        assert_eq!(
            lines.next().unwrap(),
            "episode,exp_reward,exp_cons_0,realized_reward,realized_cons_0,cum_cons_0,rew_reg,cons_reg,planner_status"
        );
        assert_eq!(lines.count(), 4);
        let back = ExperimentConfig::from_text(&fs::read_to_string(&pa[1]).unwrap()).unwrap();
        assert_eq!(back, cfg);
    }
}
