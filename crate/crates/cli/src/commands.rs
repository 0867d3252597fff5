use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use pixmap_core::detector::{self, SavedModel, TrainConfig};
use pixmap_core::experiment::{comparison_csv, run_experiment_dir};
use pixmap_core::image::{self, decode_ppm, encode_imagef, encode_pgm};
use pixmap_core::mapping::{tables_to_csv, MappingMode};
use pixmap_core::spectral::{azimuthal_profile, mean_spectrum};
use pixmap_core::synthgen::{write_benchmark, BenchmarkConfig};
use pixmap_core::{rng, Reducer};

use crate::run_manifest::{write_atomic, RunManifest};
use crate::{Command, EvalArgs, GenArgs, MapArgs, ReportArgs, SpectrumArgs, TrainArgs, TrainFlags};

/// A failure reported as `error[kind]: message` on one line.
#[derive(Debug)]
pub struct CliError {
    kind: String,
    message: String,
}

impl CliError {
    pub fn new(kind: &str, message: impl Into<String>) -> Self {
        Self {
            kind: kind.to_string(),
            message: message.into(),
        }
    }

    pub fn kind(&self) -> &str {
        &self.kind
    }

    pub fn message(&self) -> &str {
        &self.message
    }
}

impl From<pixmap_core::Error> for CliError {
    fn from(e: pixmap_core::Error) -> Self {
        Self::new(e.kind(), e.to_string())
    }
}

type Result<T> = std::result::Result<T, CliError>;

pub fn run(command: Command) -> Result<()> {
    match command {
        Command::Gen(a) => gen(a),
        Command::Map(a) => map(a),
        Command::Spectrum(a) => spectrum(a),
        Command::Train(a) => train(a),
        Command::Eval(a) => eval(a),
        Command::Report(a) => report(a),
    }
}

fn read(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|e| CliError::new("io", format!("{}: {e}", path.display())))
}

fn read_text(path: &Path) -> Result<String> {
    String::from_utf8(read(path)?).map_err(|_| CliError::new("io", format!("{}: not UTF-8 text", path.display())))
}

fn parse_reducer(s: &str) -> Result<Reducer> {
    Ok(s.parse::<Reducer>()?)
}

fn gen(a: GenArgs) -> Result<()> {
    let cfg = BenchmarkConfig {
        train_upsampler: a.train_upsampler,
        test_upsampler: a.test_upsampler,
        confound: a.confound,
        n_per_class: a.n,
        size: a.size,
        noise_sigma: a.noise_sigma,
    };
    let mut m = RunManifest::new("gen");
    m.flag("out", a.out.display())
        .flag("train_upsampler", a.train_upsampler)
        .flag("test_upsampler", a.test_upsampler)
        .switch("confound", a.confound)
        .flag("n", a.n)
        .flag("seed", a.seed)
        .flag("size", a.size)
        .flag("noise_sigma", a.noise_sigma)
        .seed("root", a.seed);
    let (train, test) = write_benchmark(&a.out, &cfg, a.seed)?;
    m.outputs.push(a.out.clone());
    m.write_all()?;
    println!(
        "wrote {} train and {} test images to {}",
        train.entries.len(),
        test.entries.len(),
        a.out.display()
    );
    Ok(())
}

/// Combine `--mode` with the optional `--patch`, `--block` and `--cutoff`
/// flags. A parameter given both ways, or to a mode that has no such
/// parameter, is a conflict.
fn resolve_mode(a: &MapArgs) -> Result<Reducer> {
    let (name, inline) = match a.mode.split_once(':') {
        Some((n, v)) => (n, Some(v)),
        None => (a.mode.as_str(), None),
    };
    let extras = [
        ("patch", a.patch.map(|v| v.to_string()), "shuffle"),
        ("block", a.block.map(|v| v.to_string()), "npr"),
        ("cutoff", a.cutoff.map(|v| v.to_string()), "highpass"),
    ];
    let mut param = inline.map(str::to_string);
    for (flag, value, owner) in extras {
        let Some(value) = value else { continue };
        if name != owner {
            return Err(CliError::new(
                "conflicting-arguments",
                format!("--{flag} only applies to --mode {owner}, not {}", a.mode),
            ));
        }
        if param.is_some() {
            return Err(CliError::new(
                "conflicting-arguments",
                format!("--{flag} conflicts with the parameter in --mode {}", a.mode),
            ));
        }
        param = Some(value);
    }
    let spec = match param {
        Some(p) => format!("{name}:{p}"),
        None => name.to_string(),
    };
    parse_reducer(&spec)
}

fn map(a: MapArgs) -> Result<()> {
    let reducer = resolve_mode(&a)?;
    let seed = match (reducer.is_stochastic(), a.seed) {
        (true, None) => {
            return Err(CliError::new(
                "seed-required",
                format!("--mode {reducer} needs --seed"),
            ))
        }
        (_, s) => s.unwrap_or(0),
    };
    let img = decode_ppm(&read(&a.input)?)?;
    let out = reducer.prepare(&img, seed)?;

    let mut m = RunManifest::new("map");
    m.flag("mode", reducer).flag("in", a.input.display()).flag("out", a.out.display());
    if let Some(s) = a.seed {
        m.flag("seed", s).seed("map", s);
    }
    m.inputs.push(a.input.clone());
    write_atomic(&a.out, &encode_imagef(&out))?;
    m.outputs.push(a.out.clone());

    if let Some(path) = &a.tables_csv {
        let tables = match reducer {
            Reducer::Fixed => MappingMode::Fixed.tables(),
            Reducer::Random => MappingMode::Random { seed }.tables(),
            _ => {
                return Err(CliError::new(
                    "invalid-argument",
                    format!("--tables-csv needs --mode fixed or random, got {reducer}"),
                ))
            }
        };
        write_atomic(path, tables_to_csv(&tables).as_bytes())?;
        m.flag("tables_csv", path.display());
        m.outputs.push(path.clone());
    }
    m.write_all()
}

fn list_ppm(dir: &Path) -> Result<Vec<PathBuf>> {
    let entries = fs::read_dir(dir).map_err(|e| CliError::new("io", format!("{}: {e}", dir.display())))?;
    let mut files: Vec<PathBuf> = entries
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "ppm"))
        .collect();
    files.sort();
    if files.is_empty() {
        return Err(CliError::new("empty", format!("no .ppm files in {}", dir.display())));
    }
    Ok(files)
}

fn spectrum(a: SpectrumArgs) -> Result<()> {
    let reducer = parse_reducer(&a.reducer)?;
    let files = list_ppm(&a.input)?;
    let mut planes = Vec::with_capacity(files.len());
    for (i, f) in files.iter().enumerate() {
        let img = image::read_ppm(f)?;
        planes.push(match reducer {
            // Raw pixel values, not the detector's [-1, 1] scaling.
            Reducer::None => image::to_float(&img),
            r => r.prepare(&img, rng::derive_seed(a.seed, "image", i as u64))?,
        });
    }
    let spec = mean_spectrum(&planes)?;
    let profile = azimuthal_profile(&spec);

    let mut m = RunManifest::new("spectrum");
    m.flag("in", a.input.display())
        .flag("reducer", reducer)
        .flag("seed", a.seed)
        .flag("out", a.out.display())
        .switch("log", a.log)
        .seed("root", a.seed);
    m.inputs.push(a.input.clone());
    write_atomic(&a.out, profile.to_csv(a.log).as_bytes())?;
    m.outputs.push(a.out.clone());
    if let Some(path) = &a.heatmap {
        let pgm = encode_pgm(spec.height(), spec.width(), &spec.log_heatmap())?;
        write_atomic(path, &pgm)?;
        m.flag("heatmap", path.display());
        m.outputs.push(path.clone());
    }
    m.write_all()?;
    println!("{} images, {} radii -> {}", files.len(), profile.values.len(), a.out.display());
    Ok(())
}

/// Defaults, then the config file, then explicit flags.
fn resolve_train_config(flags: &TrainFlags, reducer: Option<&str>) -> Result<TrainConfig> {
    let mut cfg = TrainConfig::default();
    if let Some(path) = &flags.config {
        cfg = cfg.apply_key_values(&read_text(path)?)?;
    }
    let mut set = |key: &str, value: Option<String>| -> Result<()> {
        if let Some(v) = value {
            cfg.set(key, &v)?;
        }
        Ok(())
    };
    set("lr", flags.lr.map(|v| v.to_string()))?;
    set("beta1", flags.beta1.map(|v| v.to_string()))?;
    set("beta2", flags.beta2.map(|v| v.to_string()))?;
    set("weight_decay", flags.weight_decay.map(|v| v.to_string()))?;
    set("epochs", flags.epochs.map(|v| v.to_string()))?;
    set("batch_size", flags.batch_size.map(|v| v.to_string()))?;
    set("crop", flags.crop.map(|v| v.to_string()))?;
    set("seed", flags.seed.map(|v| v.to_string()))?;
    set("reducer", reducer.map(str::to_string))?;
    cfg.validate()?;
    Ok(cfg)
}

fn record_train_config(m: &mut RunManifest, cfg: &TrainConfig, config: Option<&Path>) {
    m.flag("lr", cfg.adam.lr)
        .flag("beta1", cfg.adam.beta1)
        .flag("beta2", cfg.adam.beta2)
        .flag("weight_decay", cfg.adam.weight_decay)
        .flag("epochs", cfg.epochs)
        .flag("batch_size", cfg.batch_size)
        .flag("crop", cfg.crop)
        .flag("seed", cfg.seed)
        .seed("train", cfg.seed);
    if let Some(p) = config {
        // Its values are already expanded into the flags above.
        m.flags.push(("config".into(), p.display().to_string()));
        m.inputs.push(p.to_path_buf());
    }
}

fn train(a: TrainArgs) -> Result<()> {
    let cfg = resolve_train_config(&a.flags, a.reducer.as_deref())?;
    let mut m = RunManifest::new("train");
    m.flag("data", a.data.display()).flag("reducer", cfg.reducer);
    record_train_config(&mut m, &cfg, a.flags.config.as_deref());
    m.flag("out", a.out.display());
    m.inputs.push(a.data.clone());

    let outcome = detector::train(&a.data, &cfg)?;
    let model = SavedModel {
        reducer: cfg.reducer,
        crop: cfg.crop,
        params: outcome.params,
    };
    write_atomic(&a.out, model.to_text().as_bytes())?;
    m.outputs.push(a.out.clone());
    if let Some(path) = &a.loss_csv {
        let mut csv = String::from("epoch,loss\n");
        for (e, l) in outcome.loss_trace.iter().enumerate() {
            writeln!(csv, "{},{l}", e + 1).unwrap();
        }
        write_atomic(path, csv.as_bytes())?;
        m.flag("loss_csv", path.display());
        m.outputs.push(path.clone());
    }
    m.write_all()?;
    if let Some(last) = outcome.loss_trace.last() {
        println!("final_loss={last:.6}");
    }
    Ok(())
}

fn eval(a: EvalArgs) -> Result<()> {
    let model = SavedModel::from_text(&read_text(&a.model)?)?;
    let requested = parse_reducer(&a.reducer)?;
    if requested != model.reducer {
        return Err(pixmap_core::Error::ReducerMismatch {
            trained: model.reducer.to_string(),
            requested: requested.to_string(),
        }
        .into());
    }
    let report = detector::evaluate(&model.params, &a.data, requested, model.crop)?;
    let kv = report.to_key_value();
    let csv = report.breakdown_csv();
    print!("{kv}{csv}");

    let mut m = RunManifest::new("eval");
    m.flag("model", a.model.display())
        .flag("data", a.data.display())
        .flag("reducer", requested);
    m.inputs.extend([a.model.clone(), a.data.clone()]);
    if let Some(p) = &a.out {
        write_atomic(p, kv.as_bytes())?;
        m.flag("out", p.display());
        m.outputs.push(p.clone());
    }
    if let Some(p) = &a.breakdown_csv {
        write_atomic(p, csv.as_bytes())?;
        m.flag("breakdown_csv", p.display());
        m.outputs.push(p.clone());
    }
    m.write_all()
}

fn report(a: ReportArgs) -> Result<()> {
    let cfg = resolve_train_config(&a.flags, None)?;
    for r in Reducer::COMPARISON {
        r.check_crop(cfg.crop)?;
    }
    let mut m = RunManifest::new("report");
    m.flag("data", a.data.display());
    record_train_config(&mut m, &cfg, a.flags.config.as_deref());
    m.flag("out", a.out.display());
    m.inputs.push(a.data.clone());

    let rows = run_experiment_dir(&a.data, &cfg)?;
    let csv = comparison_csv(&rows);
    write_atomic(&a.out, csv.as_bytes())?;
    m.outputs.push(a.out.clone());
    m.write_all()?;
    print!("{csv}");
    Ok(())
}
