use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use crate::cli::{Cli, Command, SweepAxis, SynthModeArg};
use crate::data::{load_dataset, save_dataset, synthesize, DatasetFormat, SynthMode, SynthSpec};
use crate::error::{Error, Result};
use crate::forest::{check_depth_constraint, load_model, save_model};
use crate::metrics::{cross_validate, evaluate, EvaluationReport, Measure};
use crate::training::{train, TrainConfig, TrainEvent};

const DEFAULT_FOLDS: usize = 10;

pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Train {
            data,
            model,
            log,
            log_every,
            train: args,
        } => {
            let (config, _) = args.resolve()?;
            let dataset = load_dataset(&data.dataset, data.format())?;
            let log_path = log.unwrap_or_else(|| with_suffix(&model, ".log.tsv"));
            cmd_train(&dataset, &config, &model, &log_path, log_every)
        }
        Command::Predict { data, model, out } => {
            let dataset = load_dataset(&data.dataset, data.format())?;
            let forest = load_model(&model)?;
            let mut sink = open_output(out.as_deref())?;
            for sample in dataset.samples() {
                let g = forest.predict(&sample.features)?;
                let probs: Vec<String> = g.as_slice().iter().map(|p| format!("{p:.17e}")).collect();
                writeln!(sink, "{} {}", probs.join(" "), g.argmax())?;
            }
            sink.flush()?;
            Ok(())
        }
        Command::Eval { data, model, out } => {
            let dataset = load_dataset(&data.dataset, data.format())?;
            let forest = load_model(&model)?;
            let report = evaluate(&forest, &dataset)?;
            emit_report(&report, out.as_deref())
        }
        Command::Cv {
            data,
            folds,
            out,
            train: args,
        } => {
            let (config, file_folds) = args.resolve()?;
            let folds = folds.or(file_folds).unwrap_or(DEFAULT_FOLDS);
            let dataset = load_dataset(&data.dataset, data.format())?;
            let report = cross_validate(&dataset, &config, folds, config.seed)?;
            emit_report(&report, out.as_deref())
        }
        Command::Synth {
            out,
            format,
            samples,
            features,
            labels,
            mode,
            components,
            noise,
            sigma,
            seed,
        } => {
            let spec = SynthSpec {
                samples,
                feature_dim: features,
                label_count: labels,
                mode: match mode {
                    SynthModeArg::Unimodal => SynthMode::GaussianUnimodal,
                    SynthModeArg::Mixture => SynthMode::TwoComponentMixture,
                },
                components,
                noise,
                sigma,
                seed,
                ..SynthSpec::default()
            };
            let format = format.unwrap_or_else(|| DatasetFormat::from_path(&out));
            cmd_synth(&spec, &out, format)
        }
        Command::Sweep {
            data,
            axis,
            values,
            folds,
            out,
            train: args,
        } => {
            let (config, file_folds) = args.resolve()?;
            let folds = folds.or(file_folds).unwrap_or(DEFAULT_FOLDS);
            if values.is_empty() {
                return Err(Error::Config("sweep needs at least one value".into()));
            }
            let dataset = load_dataset(&data.dataset, data.format())?;
            let mut sink = open_output(out.as_deref())?;
            cmd_sweep(&dataset, &config, axis, &values, folds, &mut sink)?;
            sink.flush()?;
            Ok(())
        }
    }
}

fn with_suffix(path: &Path, suffix: &str) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

fn open_output(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn emit_report(report: &EvaluationReport, json_path: Option<&Path>) -> Result<()> {
    print!("{report}");
    if let Some(path) = json_path {
        let mut out = BufWriter::new(File::create(path)?);
        out.write_all(report.to_json()?.as_bytes())?;
        out.write_all(b"\n")?;
        out.flush()?;
    }
    Ok(())
}

fn cmd_train(
    dataset: &crate::data::Dataset,
    config: &TrainConfig,
    model_path: &Path,
    log_path: &Path,
    log_every: usize,
) -> Result<()> {
    let mut log = BufWriter::new(File::create(log_path)?);
    let mut log_err = None;
    let every = log_every.max(1);
    let last = config.max_iterations;
    let forest = train(dataset, config, |event| {
        if let TrainEvent::Step { iteration, loss, elapsed } = event {
            if (iteration % every == 0 || *iteration == last) && log_err.is_none() {
                if let Err(e) = writeln!(log, "{iteration}\t{loss:.6}\t{:.3}", elapsed.as_secs_f64()) {
                    log_err = Some(e);
                }
            }
        }
    })?;
    if let Some(e) = log_err {
        return Err(e.into());
    }
    log.flush()?;
    save_model(&forest, model_path)
}

fn cmd_synth(spec: &SynthSpec, out: &Path, format: DatasetFormat) -> Result<()> {
    let (dataset, truth) = synthesize(spec)?;
    save_dataset(&dataset, out, format)?;
    let mut sidecar = BufWriter::new(File::create(with_suffix(out, ".truth.json"))?);
    sidecar.write_all(serde_json::to_string_pretty(&truth)?.as_bytes())?;
    sidecar.write_all(b"\n")?;
    sidecar.flush()?;
    Ok(())
}

/// Writes a tab-separated table: the axis value, then mean and std of every
/// measure. Values that violate a constraint are reported on stderr and
/// skipped.
pub(crate) fn cmd_sweep(
    dataset: &crate::data::Dataset,
    base: &TrainConfig,
    axis: SweepAxis,
    values: &[usize],
    folds: usize,
    out: &mut dyn Write,
) -> Result<()> {
    let axis_name = match axis {
        SweepAxis::TreeCount => "tree_count",
        SweepAxis::TreeDepth => "tree_depth",
    };
    let mut header = vec![axis_name.to_owned()];
    for m in Measure::ALL {
        header.push(format!("{}_mean", column(m)));
        header.push(format!("{}_std", column(m)));
    }
    writeln!(out, "{}", header.join("\t"))?;

    let mut completed = 0;
    for &value in values {
        let config = match sweep_config(base, axis, value) {
            Ok(c) => c,
            Err(e) => {
                eprintln!("skipping {axis_name} = {value}: {e}");
                continue;
            }
        };
        let report = cross_validate(dataset, &config, folds, config.seed)?;
        let mut row = vec![value.to_string()];
        for m in Measure::ALL {
            row.push(format!("{:.6}", report.mean.get(m)));
            row.push(format!("{:.6}", report.std.get(m)));
        }
        writeln!(out, "{}", row.join("\t"))?;
        completed += 1;
    }
    if completed == 0 {
        return Err(Error::Config(format!("no valid {axis_name} values in sweep")));
    }
    Ok(())
}

/// Depth sweeps pair each depth with `2^(depth-1)` output units.
fn sweep_config(base: &TrainConfig, axis: SweepAxis, value: usize) -> Result<TrainConfig> {
    let config = match axis {
        SweepAxis::TreeCount => TrainConfig {
            tree_count: value,
            ..base.clone()
        },
        SweepAxis::TreeDepth => {
            check_depth_constraint(value, usize::MAX)?;
            TrainConfig {
                tree_depth: value,
                output_units: 1 << (value - 1),
                ..base.clone()
            }
        }
    };
    config.validate()?;
    Ok(config)
}

fn column(m: Measure) -> &'static str {
    match m {
        Measure::Kl => "kl",
        Measure::Euclidean => "euclidean",
        Measure::Sorensen => "sorensen",
        Measure::SquaredChi2 => "squared_chi2",
        Measure::Fidelity => "fidelity",
        Measure::Intersection => "intersection",
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn depth_sweep_sets_units() {
        let base = TrainConfig::default();
        let c = sweep_config(&base, SweepAxis::TreeDepth, 9).unwrap();
        assert_eq!((c.tree_depth, c.output_units), (9, 256));
        assert!(sweep_config(&base, SweepAxis::TreeDepth, 1).is_err());
        assert!(sweep_config(&base, SweepAxis::TreeCount, 0).is_err());
        assert_eq!(sweep_config(&base, SweepAxis::TreeCount, 20).unwrap().tree_count, 20);
    }

    #[test]
    fn log_suffix() {
        assert_eq!(with_suffix(Path::new("a/m.json"), ".log.tsv"), PathBuf::from("a/m.json.log.tsv"));
    }
}
