use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use protoneuro_core::coding::{encode as encode_codes, init_weights, table1_fixture, WeightSource};
use protoneuro_core::config::RunConfig;
use protoneuro_core::dpv::{generate_waveform, sample_instants, step_count, write_instants_csv};
use protoneuro_core::network::{run_rate, run_spiking, RateNetworkSpec, SpikingNetworkSpec};
use protoneuro_core::pipeline::{run_pipeline, write_outputs, PipelineReport};
use protoneuro_core::qsar::{
    confidence_bounds, fit, percent_deviation, predict, read_observations_csv, QsarCoefficients, BASIS_LEN, BASIS_NAMES,
};
use protoneuro_core::seed::derive_seed;
use protoneuro_core::signal::{
    read_timeseries_csv, synthesize_spiky_series, write_timeseries_csv, ExperimentManifest, SyntheticSpikeSpec,
};
use protoneuro_core::spikes::{compute_stats, detect_spikes};
use protoneuro_core::{Error, Result};
use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::{
    Common, DetectArgs, EncodeArgs, PipelineArgs, QsarFitArgs, QsarPredictArgs, ReportArgs, SimArgs, SynthArgs,
    WaveformArgs, WeightsArgs, WeightsChoice,
};

/// Config file, then environment, then `--seed`.
fn load_config(common: &Common) -> Result<RunConfig> {
    let mut config = RunConfig::load_or_default(common.config.as_deref())?;
    config.apply_env()?;
    if let Some(seed) = common.seed {
        config.seed = seed;
    }
    Ok(config)
}

fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|source| Error::Json {
        path: path.to_path_buf(),
        source,
    })
}

fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("serialisable");
    s.push('\n');
    s
}

fn create_parent(path: &Path) -> Result<()> {
    match path.parent() {
        Some(dir) if !dir.as_os_str().is_empty() => std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e)),
        _ => Ok(()),
    }
}

/// Create `path` and hand a buffered writer to `body`.
fn write_with(path: &Path, body: impl FnOnce(&mut BufWriter<File>) -> std::io::Result<()>) -> Result<()> {
    create_parent(path)?;
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = BufWriter::new(file);
    body(&mut out).and_then(|_| out.flush()).map_err(|e| Error::io(path, e))
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    write_with(path, |w| w.write_all(text.as_bytes()))
}

fn file_stem(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "series".into())
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "none".into(), |v| format!("{v}"))
}

pub fn waveform(args: WaveformArgs) -> Result<u8> {
    let mut config = load_config(&args.common)?;
    let p = &mut config.dpv;
    let overrides = [
        (&mut p.equilibrium_time, args.equilibrium_time),
        (&mut p.start_potential, args.start_potential),
        (&mut p.end_potential, args.end_potential),
        (&mut p.step_size, args.step_size),
        (&mut p.pulse_amplitude, args.pulse_amplitude),
        (&mut p.pulse_width, args.pulse_width),
        (&mut p.scan_rate, args.scan_rate),
    ];
    for (field, flag) in overrides {
        if let Some(v) = flag {
            *field = v;
        }
    }
    config.validate()?;

    let steps = step_count(&config.dpv)?;
    let wave = generate_waveform(&config.dpv)?;
    let out = args.out.unwrap_or_else(|| config.output_dir.join("waveform.csv"));
    create_parent(&out)?;
    wave.write_csv_file(&out)?;
    if let Some(path) = &args.instants {
        let instants = sample_instants(&config.dpv)?;
        write_with(path, |w| write_instants_csv(&instants, w))?;
    }
    println!("steps={steps} scan_duration_s={}", wave.scan_duration());
    Ok(0)
}

pub fn detect(args: DetectArgs) -> Result<u8> {
    let mut config = load_config(&args.common)?;
    if let Some(t) = args.threshold {
        config.detection.threshold = t;
    }
    if let Some(d) = args.min_peak_distance {
        config.detection.min_peak_distance = d;
    }
    config.validate()?;

    let series = read_timeseries_csv(&args.input)?;
    let series = if series.label().is_empty() {
        series.with_label(file_stem(&args.input))
    } else {
        series
    };
    let train = detect_spikes(&series, &config.detection)?;
    let stats = compute_stats(&train);

    let dir = args.out_dir.unwrap_or(config.output_dir);
    let stem = file_stem(&args.input);
    write_with(&dir.join(format!("{stem}_spikes.csv")), |w| train.write_csv(w))?;
    write_text(&dir.join(format!("{stem}_stats.json")), &to_json(&stats))?;
    println!(
        "count={} mean_isi_s={} frequency_mhz={}",
        stats.count,
        fmt_opt(stats.mean_isi_s),
        fmt_opt(stats.frequency_mhz)
    );
    Ok(0)
}

pub fn pipeline(args: PipelineArgs) -> Result<u8> {
    let config = RunConfig::load_or_default(args.common.config.as_deref())?;
    let mut manifest = ExperimentManifest::load(&args.manifest)?;
    if let Ok(raw) = std::env::var(protoneuro_core::config::SEED_ENV) {
        manifest.seed = protoneuro_core::config::parse_seed(&raw)?;
    }
    if let Some(seed) = args.common.seed {
        manifest.seed = seed;
    }
    if let Some(w) = args.weights {
        manifest.weights = match w {
            WeightsChoice::Table1 => WeightSource::Table1,
            WeightsChoice::Seeded => WeightSource::Seeded,
        };
    }
    if let Some(n) = args.neurons {
        manifest.coding.neuron_count = n;
    }
    if let Some(t) = args.threshold {
        manifest.detection.threshold = t;
    }
    if let Some(t) = args.coding_threshold {
        manifest.coding.threshold = t;
    }

    let outcome = run_pipeline(&manifest)?;
    let dir = args.out_dir.unwrap_or(config.output_dir);
    let report_path = write_outputs(&outcome, &dir)?;
    for (label, e) in &outcome.errors {
        eprintln!("sample {label}: {e}");
    }
    let report = &outcome.report;
    println!(
        "samples={} failed={} report={}",
        report.samples.len(),
        report.failures(),
        report_path.display()
    );
    Ok(outcome.exit_code() as u8)
}

pub fn synth(args: SynthArgs) -> Result<u8> {
    let config = RunConfig::load_or_default(args.common.config.as_deref())?;
    let mut spec: SyntheticSpikeSpec = match (&args.spec, config.synth) {
        (Some(path), _) => read_json(path)?,
        (None, Some(spec)) => spec,
        (None, None) => {
            return Err(Error::Validation(
                "no synthetic spec: pass --spec or add a `synth` section to the config".into(),
            ))
        }
    };
    // the spec carries its own seed; environment and flag still win
    if let Ok(raw) = std::env::var(protoneuro_core::config::SEED_ENV) {
        spec.seed = protoneuro_core::config::parse_seed(&raw)?;
    }
    if let Some(seed) = args.common.seed {
        spec.seed = seed;
    }
    if let Some(sd) = args.noise_sd {
        spec.noise_sd = sd;
    }
    let series = synthesize_spiky_series(&spec)?;
    create_parent(&args.out)?;
    write_timeseries_csv(&series, &args.out)?;
    println!("samples={} seed={}", series.len(), spec.seed);
    Ok(0)
}

pub fn encode(args: EncodeArgs) -> Result<u8> {
    let mut config = load_config(&args.common)?;
    if let Some(t) = args.threshold {
        config.coding.threshold = t;
    }
    config.validate()?;

    let series = args
        .inputs
        .iter()
        .map(|p| read_timeseries_csv(p))
        .collect::<Result<Vec<_>>>()?;
    let columns = series.iter().map(|s| s.len()).min().unwrap_or(0);
    let potentials: Vec<Vec<f64>> = series.iter().map(|s| s.values()[..columns].to_vec()).collect();
    let labels = series
        .iter()
        .zip(&args.inputs)
        .map(|(s, p)| {
            if s.label().is_empty() {
                file_stem(p)
            } else {
                s.label().to_string()
            }
        })
        .collect();
    let time_base = series[0].times().get(1).map_or(1.0, |t1| t1 - series[0].times()[0]);
    let codes = encode_codes(&potentials, config.coding.threshold)?
        .with_labels(labels)?
        .with_time_base(time_base);

    let out = args.out.unwrap_or_else(|| config.output_dir.join("codes.csv"));
    write_with(&out, |w| codes.write_csv(w))?;
    let active: usize = codes.entries.iter().flatten().map(|&c| c as usize).sum();
    println!(
        "neurons={} columns={} active={active}",
        codes.neurons(),
        codes.columns()
    );
    Ok(0)
}

pub fn weights(args: WeightsArgs) -> Result<u8> {
    let config = load_config(&args.common)?;
    let w = if args.table1 {
        table1_fixture()
    } else {
        init_weights(args.neurons, derive_seed(config.seed, "weights"))?
    };
    match &args.out {
        Some(path) => write_with(path, |out| w.write_csv(out))?,
        None => {
            let stdout = std::io::stdout();
            match w.write_csv(stdout.lock()) {
                Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => return Err(Error::io("<stdout>", e)),
                _ => {}
            }
        }
    }
    Ok(0)
}

fn sim_inputs<T: DeserializeOwned>(spec: &Option<PathBuf>, section: Option<T>, name: &str) -> Result<T> {
    match (spec, section) {
        (Some(path), _) => read_json(path),
        (None, Some(s)) => Ok(s),
        (None, None) => Err(Error::Validation(format!(
            "no network spec: pass --spec or add a `{name}` section to the config"
        ))),
    }
}

pub fn sim_spiking(args: SimArgs) -> Result<u8> {
    let config = load_config(&args.common)?;
    let mut spec: SpikingNetworkSpec = sim_inputs(&args.spec, config.spiking.clone(), "spiking")?;
    if let Some(steps) = args.steps {
        spec.stimulus.steps = steps;
    }
    let (net, fin) = spec.build(config.seed)?;
    let trace = run_spiking(&net, &fin)?;

    let dir = args.out_dir.unwrap_or(config.output_dir);
    write_with(&dir.join("potentials.csv"), |w| trace.write_states_csv(false, w))?;
    write_with(&dir.join("raster.csv"), |w| trace.write_raster_csv(w))?;
    write_with(&dir.join("output.csv"), |w| trace.write_output_csv(w))?;
    println!(
        "neurons={} steps={} spikes={}",
        net.neurons(),
        trace.times.len(),
        trace.raster.len()
    );
    Ok(0)
}

pub fn sim_rate(args: SimArgs) -> Result<u8> {
    let config = load_config(&args.common)?;
    let mut spec: RateNetworkSpec = sim_inputs(&args.spec, config.rate.clone(), "rate")?;
    if let Some(steps) = args.steps {
        spec.stimulus.steps = steps;
        if let Some(fb) = spec.feedback.as_mut() {
            fb.steps = steps;
        }
    }
    let (net, fin, fout) = spec.build(config.seed)?;
    let trace = run_rate(&net, &fin, &fout)?;

    let dir = args.out_dir.unwrap_or(config.output_dir);
    write_with(&dir.join("states.csv"), |w| trace.write_states_csv(false, w))?;
    write_with(&dir.join("activities.csv"), |w| trace.write_states_csv(true, w))?;
    write_with(&dir.join("output.csv"), |w| trace.write_output_csv(w))?;
    let last = trace
        .activities
        .last()
        .map(|r| r.iter().map(|v| v.abs()).fold(0.0, f64::max));
    println!(
        "units={} steps={} final_max_abs_activity={}",
        net.units(),
        trace.times.len(),
        fmt_opt(last)
    );
    Ok(0)
}

pub fn qsar_fit(args: QsarFitArgs) -> Result<u8> {
    let observations = read_observations_csv(&args.data)?;
    let result = fit(&observations)?;
    let mut coefficients = result.coefficients;
    match confidence_bounds(&result, &observations, args.level) {
        Ok(bounds) => coefficients = coefficients.with_bounds(bounds),
        Err(Error::InsufficientDegreesOfFreedom { .. }) => {
            eprintln!(
                "note: {} observations leave no residual degrees of freedom; bounds omitted",
                observations.len()
            );
        }
        Err(e) => return Err(e),
    }
    let json = to_json(&coefficients);
    match &args.out {
        Some(path) => write_text(path, &json)?,
        None => print!("{json}"),
    }
    eprintln!(
        "observations={} rss={} parameters={BASIS_LEN}",
        result.observations, result.residual_sum_of_squares
    );
    Ok(0)
}

pub fn qsar_predict(args: QsarPredictArgs) -> Result<u8> {
    let coefficients: QsarCoefficients = match &args.coefficients {
        Some(path) => read_json(path)?,
        None => QsarCoefficients::published(),
    };
    let values = coefficients.to_array();
    if let Some(i) = values.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFinite(format!("coefficient {}", BASIS_NAMES[i])));
    }
    match (args.x, args.y, &args.data) {
        (Some(x), Some(y), _) => println!("{}", predict(&coefficients, x, y)?),
        (_, _, Some(path)) => {
            println!("label,mean_firing_rate_hz,predicted_hz,percent_deviation");
            for o in read_observations_csv(path)? {
                let p = predict(&coefficients, o.predictors.x, o.predictors.y)?;
                let dev = percent_deviation(o.mean_firing_rate, p)?;
                println!("{},{},{p},{dev}", o.predictors.label, o.mean_firing_rate);
            }
        }
        _ => return Err(Error::Validation("pass --x and --y, or --data".into())),
    }
    Ok(0)
}

pub fn report(args: ReportArgs) -> Result<u8> {
    let report: PipelineReport = read_json(&args.report)?;
    println!("seed={} weights={:?}", report.seed, report.weights.source);
    for s in &report.samples {
        match (&s.stats, &s.error) {
            (Some(st), _) => println!(
                "{}: count={} mean_isi_s={} frequency_mhz={}",
                s.label,
                st.count,
                fmt_opt(st.mean_isi_s),
                fmt_opt(st.frequency_mhz)
            ),
            (None, Some(e)) => println!("{}: failed: {e}", s.label),
            (None, None) => println!("{}: no result", s.label),
        }
    }
    if let Some(a) = &report.aggregate {
        println!(
            "aggregate: samples={} mean_count={} mean_isi_of_means_s={}",
            a.samples,
            a.mean_count,
            fmt_opt(a.mean_isi_of_means_s)
        );
    }
    let grid = &report.psi_ppi.grid;
    let total: f64 = grid.iter().flatten().sum();
    println!(
        "code_matrix={}x{} psi_ppi_total={total}",
        report.code_matrix.neurons(),
        report.code_matrix.columns()
    );
    Ok(if report.failures() > 0 { 2 } else { 0 })
}
