use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{CommandFactory, Parser, Subcommand};

use solo_sf::eval::{evaluate_protocol, oracle_dominance_mask, score_mixture, DEFAULT_ENERGY_FLOOR, METHODS};
use solo_sf::features::{assemble_composite, compute_rir_sf, compute_solo_sf, spatial_feature_3d, FeatureKind, FeatureMap};
use solo_sf::io::{export_heatmap, load_tensor, read_wav, save_tensor, write_wav, RunConfig, TensorData};
use solo_sf::room::{render_protocol_batch, render_protocol_mixture, rir_to_kernel, MixtureRecord, RirTimeDomain, Rt60Band};
use solo_sf::select::{kernel_energy_report, SoloPart, StrategyKind};
use solo_sf::{lps, stft, Error, Result};

#[derive(Parser)]
#[command(name = "solo-sf", version, about = "Solo-segment spatial features for target speaker extraction")]
struct Cli {
    /// TOML run configuration; flags override its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads for batch work.
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// Log progress to stderr.
    #[arg(short, long, global = true)]
    verbose: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Sample protocol rooms and render two-speaker mixtures.
    Simulate {
        #[arg(long)]
        band: Option<Rt60Band>,
        #[arg(long)]
        n: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Compute a feature map from a mixture recording.
    Extract {
        #[arg(long)]
        mixture: Option<PathBuf>,
        #[arg(long)]
        feature: Option<FeatureKind>,
        /// Solo recording of the target (solo_sf, composite).
        #[arg(long)]
        solo: Option<PathBuf>,
        /// Target RIR tensor `[M x L]` (rir_sf).
        #[arg(long)]
        rir: Option<PathBuf>,
        /// Mixture record from `simulate` (3d_sf).
        #[arg(long)]
        scenario: Option<PathBuf>,
        #[arg(long)]
        source: Option<usize>,
        #[arg(long)]
        strategy: Option<StrategyKind>,
        #[arg(long)]
        k: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Select a kernel from a solo recording.
    Select {
        #[arg(long)]
        solo: Option<PathBuf>,
        #[arg(long)]
        strategy: Option<StrategyKind>,
        #[arg(long)]
        k: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Compare kernel strategies over a simulated batch.
    Evaluate {
        #[arg(long)]
        band: Option<Rt60Band>,
        #[arg(long)]
        n: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Render one scenario and write its features as heatmaps.
    Demo {
        #[arg(long)]
        band: Option<Rt60Band>,
        #[arg(long)]
        seed: Option<u64>,
    },
}

fn set<T>(slot: &mut T, flag: Option<T>) {
    if let Some(v) = flag {
        *slot = v;
    }
}

fn set_opt<T>(slot: &mut Option<T>, flag: Option<T>) {
    if flag.is_some() {
        *slot = flag;
    }
}

/// Reads the config file, applies flags, validates.
fn resolve(cli: &Cli) -> Result<RunConfig> {
    let mut cfg = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    set(&mut cfg.output_dir, cli.out.clone());
    set(&mut cfg.workers, cli.workers);
    let name = match &cli.command {
        Command::Simulate { band, n, seed } | Command::Evaluate { band, n, seed } => {
            set(&mut cfg.band, *band);
            set(&mut cfg.n, *n);
            set(&mut cfg.seed, *seed);
            if matches!(cli.command, Command::Simulate { .. }) { "simulate" } else { "evaluate" }
        }
        Command::Extract { mixture, feature, solo, rir, scenario, source, strategy, k, seed } => {
            set_opt(&mut cfg.mixture, mixture.clone());
            set_opt(&mut cfg.feature, *feature);
            set_opt(&mut cfg.solo, solo.clone());
            set_opt(&mut cfg.rir, rir.clone());
            set_opt(&mut cfg.scenario, scenario.clone());
            set(&mut cfg.source, *source);
            set(&mut cfg.strategy, *strategy);
            set(&mut cfg.kernel_frames, *k);
            set(&mut cfg.seed, *seed);
            "extract"
        }
        Command::Select { solo, strategy, k, seed } => {
            set_opt(&mut cfg.solo, solo.clone());
            set(&mut cfg.strategy, *strategy);
            set(&mut cfg.kernel_frames, *k);
            set(&mut cfg.seed, *seed);
            "select"
        }
        Command::Demo { band, seed } => {
            set(&mut cfg.band, *band);
            set(&mut cfg.seed, *seed);
            "demo"
        }
    };
    cfg.command = Some(name.to_string());
    cfg.validate()?;
    Ok(cfg)
}

/// Exits with a usage message when a required input is missing.
fn require<'a>(value: &'a Option<PathBuf>, flag: &str, why: &str) -> &'a Path {
    match value {
        Some(p) => p,
        None => Cli::command()
            .error(clap::error::ErrorKind::MissingRequiredArgument, format!("--{flag} is required {why}"))
            .exit(),
    }
}

fn out_path(cfg: &RunConfig, name: &str) -> PathBuf {
    cfg.output_dir.join(name)
}

fn write_text(cfg: &RunConfig, name: &str, text: &str) -> Result<()> {
    std::fs::write(out_path(cfg, name), text)?;
    Ok(())
}

fn save_metadata(cfg: &RunConfig) -> Result<()> {
    write_text(cfg, "run.toml", &cfg.to_toml_string()?)
}

fn load_rir(path: &Path, sample_rate: u32) -> Result<RirTimeDomain> {
    match load_tensor(path)? {
        TensorData::Real(a) if a.ndim() == 2 => Ok(RirTimeDomain {
            taps: a.into_dimensionality().map_err(|e| Error::TensorFormat(e.to_string()))?,
            sample_rate,
        }),
        other => Err(Error::TensorFormat(format!("expected a real [M x L] RIR tensor, got shape {:?}", other.shape()))),
    }
}

fn solo_part(cfg: &RunConfig, path: &Path) -> Result<SoloPart> {
    let wave = read_wav(path)?;
    SoloPart::from_spectrogram(stft(&wave, &cfg.stft_config())?, path.display().to_string())
}

fn real_tensor(map: &FeatureMap) -> TensorData {
    TensorData::Real(map.data().clone().into_dyn())
}

fn simulate(cfg: &RunConfig) -> Result<()> {
    let batch = render_protocol_batch(cfg.band, cfg.n, cfg.seed, &cfg.protocol_params())?;
    for (i, mix) in batch.iter().enumerate() {
        let dir = out_path(cfg, &format!("mix_{i:03}"));
        std::fs::create_dir_all(&dir)?;
        write_wav(&mix.mixture, dir.join("mixture.wav"))?;
        write_wav(&mix.target_image, dir.join("target.wav"))?;
        write_wav(&mix.interference_image, dir.join("interference.wav"))?;
        if let Some(solo) = &mix.solo_image {
            write_wav(solo, dir.join("solo.wav"))?;
        }
        save_tensor(dir.join("target_rir.sft"), &TensorData::Real(mix.target_rir.taps.clone().into_dyn()))?;
        std::fs::write(dir.join("scenario.toml"), toml::to_string(&MixtureRecord::from(mix))?)?;
        log::info!("rendered mixture {i}");
    }
    Ok(())
}

fn extract(cfg: &RunConfig) -> Result<()> {
    let Some(kind) = cfg.feature else {
        Cli::command()
            .error(clap::error::ErrorKind::MissingRequiredArgument, "--feature is required for extract")
            .exit()
    };
    let mixture = require(&cfg.mixture, "mixture", "for extract");
    match kind {
        FeatureKind::SoloSf | FeatureKind::Composite => {
            require(&cfg.solo, "solo", "for solo_sf and composite");
        }
        FeatureKind::RirSf => {
            require(&cfg.rir, "rir", "for rir_sf");
        }
        FeatureKind::Sf3d => {
            require(&cfg.scenario, "scenario", "for 3d_sf");
        }
        FeatureKind::Lps => {}
    }
    let wave = read_wav(mixture)?;
    let y = stft(&wave, &cfg.stft_config())?;
    let pairs = cfg.pair_set(y.num_channels())?;
    let solo_sf = |cfg: &RunConfig| -> Result<FeatureMap> {
        let solo = solo_part(cfg, require(&cfg.solo, "solo", "for solo_sf and composite"))?;
        let kernel = cfg.selection().select(&solo, cfg.kernel_frames)?;
        compute_solo_sf(&y, &kernel, &pairs)
    };
    let map = match kind {
        FeatureKind::Lps => lps(&y, cfg.ref_channel)?,
        FeatureKind::SoloSf => solo_sf(cfg)?,
        FeatureKind::Composite => assemble_composite(&lps(&y, cfg.ref_channel)?, &solo_sf(cfg)?)?,
        FeatureKind::RirSf => {
            let rir = load_rir(require(&cfg.rir, "rir", "for rir_sf"), wave.sample_rate())?;
            compute_rir_sf(&y, &rir_to_kernel(&rir, &cfg.stft_config(), cfg.kernel_frames)?, &pairs)?
        }
        FeatureKind::Sf3d => {
            let text = std::fs::read_to_string(require(&cfg.scenario, "scenario", "for 3d_sf"))?;
            let record: MixtureRecord = toml::from_str(&text)?;
            spatial_feature_3d(&y, &record.scenario.bearing(cfg.source)?, &pairs)?
        }
    };
    save_tensor(out_path(cfg, &format!("{}.sft", kind.name())), &real_tensor(&map))?;
    export_heatmap(&map, out_path(cfg, &format!("{}.pgm", kind.name())))
}

fn select(cfg: &RunConfig) -> Result<()> {
    let solo = solo_part(cfg, require(&cfg.solo, "solo", "for select"))?;
    let kernel = cfg.selection().select(&solo, cfg.kernel_frames)?;
    let report = kernel_energy_report(&kernel);
    if report.is_degenerate() {
        log::warn!("selected kernel is entirely silent");
    }
    save_tensor(out_path(cfg, "kernel.sft"), &TensorData::Complex(kernel.into_data().into_dyn()))?;
    write_text(cfg, "energy_report.csv", &report.to_csv())
}

fn evaluate(cfg: &RunConfig) -> Result<()> {
    let stft_cfg = cfg.stft_config();
    // The protocol array has 8 microphones.
    let pairs = cfg.pair_set(8)?;
    let report = evaluate_protocol(cfg.band, cfg.n, cfg.seed, &cfg.protocol_params(), &stft_cfg, cfg.kernel_frames, &pairs)?;
    write_text(cfg, "report.csv", &report.to_csv())?;
    write_text(cfg, "report.txt", &report.summary_text())
}

fn demo(cfg: &RunConfig) -> Result<()> {
    let stft_cfg = cfg.stft_config();
    let mix = render_protocol_mixture(cfg.band, cfg.seed, &cfg.protocol_params())?;
    write_wav(&mix.mixture, out_path(cfg, "mixture.wav"))?;

    let y = stft(&mix.mixture, &stft_cfg)?;
    let pairs = cfg.pair_set(y.num_channels())?;
    let solo = SoloPart::from_spectrogram(stft(mix.solo_image.as_ref().expect("protocol mixtures carry a solo part"), &stft_cfg)?, "solo")?;
    let kernel = cfg.selection().select(&solo, cfg.kernel_frames)?;
    let maps = [
        lps(&y, cfg.ref_channel)?,
        spatial_feature_3d(&y, &mix.scenario.bearing(0)?, &pairs)?,
        compute_rir_sf(&y, &rir_to_kernel(&mix.target_rir, &stft_cfg, cfg.kernel_frames)?, &pairs)?,
        compute_solo_sf(&y, &kernel, &pairs)?,
    ];
    for map in &maps {
        export_heatmap(map, out_path(cfg, &format!("{}.pgm", map.kind().name())))?;
    }

    let mask = oracle_dominance_mask(&stft(&mix.target_image, &stft_cfg)?, &stft(&mix.interference_image, &stft_cfg)?, DEFAULT_ENERGY_FLOOR)?;
    let mut text = format!(
        "room {:?} m, rt60 {:.3} s, sir {:.2} dB, overlap {:.2}\ntarget bins {}, interference bins {}\n",
        mix.scenario.room_dims,
        mix.scenario.rt60_target,
        mix.spec.sir_db,
        mix.spec.overlap_ratio,
        mask.count(solo_sf::eval::BinLabel::Target),
        mask.count(solo_sf::eval::BinLabel::Interference),
    );
    for (name, r) in METHODS.iter().zip(score_mixture(&mix, &stft_cfg, cfg.kernel_frames, &pairs)?) {
        text.push_str(&format!("{name:<13} separation {:+.4}  auc {:.4}\n", r.separation, r.auc));
    }
    write_text(cfg, "report.txt", &text)
}

fn run(cli: &Cli) -> Result<()> {
    let cfg = resolve(cli)?;
    std::fs::create_dir_all(&cfg.output_dir)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.workers)
        .build()
        .map_err(|e| Error::InvalidConfig(e.to_string()))?;
    pool.install(|| match cli.command {
        Command::Simulate { .. } => simulate(&cfg),
        Command::Extract { .. } => extract(&cfg),
        Command::Select { .. } => select(&cfg),
        Command::Evaluate { .. } => evaluate(&cfg),
        Command::Demo { .. } => demo(&cfg),
    })?;
    save_metadata(&cfg)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    env_logger::Builder::new()
        .filter_level(if cli.verbose { log::LevelFilter::Info } else { log::LevelFilter::Warn })
        .parse_default_env()
        .init();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
