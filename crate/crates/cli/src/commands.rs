use std::path::Path;

use anyhow::{bail, ensure, Context as _, Result};
use ndarray::s;

use lipsync_core::facegeo::{
    compose_map_from_features, fit_jaw as fit_jaw_model, harvest_jaw_samples, load_template_dir,
    JawRegressor, DEFAULT_HIGH, DEFAULT_LOW, MAP_SIZE,
};
use lipsync_core::features::{
    align_streams, extract_mfcc_aligned, fit_pca_dims, normalize_landmarks, read_audio_csv,
    read_landmark_csv, read_mouth_csv, write_audio_csv, write_landmark_csv,
    write_mouth_coords_csv, write_mouth_csv, AudioFeatureSequence, MouthFeatureSequence,
    NormalizeOptions, Pcm, Placement, Point, DEFAULT_PCA_DIMS, RATE_RATIO,
};
use lipsync_core::synthdata::{
    generate_corpus, oracle_floor, planted_landmark_corpus, render_portrait, synth_speech,
    OracleSpec, SyntheticFace,
};
use lipsync_core::tcn::{Checkpoint, Discriminator, DiscriminatorConfig, Generator, GeneratorConfig};
use lipsync_core::training::{
    edge_and_interior_means, evaluate, per_frame_error_profile, train_with_progress, LossWeights,
    TrainConfig,
};
use lipsync_core::windows::{
    infer_overlapped, make_training_windows, OverlapConfig, DEFAULT_OUTPUT_OVERLAP,
    DEFAULT_TRAIN_HOP, VIDEO_WINDOW,
};
use lipsync_core::PcaModel;

use crate::config::ConfigFile;
use crate::outputs::Outputs;
use crate::plot::profile_plot;
use crate::{
    EvalArgs, FitJawArgs, InferArgs, PrepareArgs, Preset, ProfileArgs, RenderArgs, SynthArgs,
    TrainArgs,
};

pub struct Context {
    pub cfg: ConfigFile,
    pub seed: Option<u64>,
}

impl Context {
    fn seed(&self) -> Result<u64> {
        self.cfg.resolve(self.seed, "seed", 0)
    }
}

fn image_size(ctx: &Context, w: Option<u32>, h: Option<u32>) -> Result<(u32, u32)> {
    Ok((
        ctx.cfg.resolve(w, "image-width", MAP_SIZE)?,
        ctx.cfg.resolve(h, "image-height", MAP_SIZE)?,
    ))
}

fn read_audio_any(path: &Path) -> Result<AudioFeatureSequence> {
    let is_wav = path
        .extension()
        .and_then(|e| e.to_str())
        .is_some_and(|e| e.eq_ignore_ascii_case("wav"));
    let seq = if is_wav {
        extract_mfcc_aligned(&Pcm::read_wav(path)?)?
    } else {
        read_audio_csv(path)?
    };
    Ok(seq)
}

fn load_generator(path: &Path) -> Result<Generator> {
    let ckpt = Checkpoint::load(path).with_context(|| format!("loading {}", path.display()))?;
    Ok(Generator::from_checkpoint(&ckpt)?)
}

fn read_pair(audio: &Path, mouth: &Path) -> Result<(AudioFeatureSequence, MouthFeatureSequence)> {
    let mut a = read_audio_any(audio).with_context(|| format!("reading {}", audio.display()))?;
    let mut m = read_mouth_csv(mouth).with_context(|| format!("reading {}", mouth.display()))?;
    align_streams(&mut a, &mut m);
    Ok((a, m))
}

pub fn prepare(ctx: &Context, a: PrepareArgs) -> Result<()> {
    let dims = ctx.cfg.resolve(a.pca_dims, "pca-dims", DEFAULT_PCA_DIMS)?;
    let size = image_size(ctx, a.image_width, a.image_height)?;
    let pcm = Pcm::read_wav(&a.audio).with_context(|| format!("reading {}", a.audio.display()))?;
    let mut audio = extract_mfcc_aligned(&pcm)?;
    let frames = read_landmark_csv(&a.landmarks, size)
        .with_context(|| format!("reading {}", a.landmarks.display()))?;
    let mut coords = frames
        .iter()
        .map(normalize_landmarks)
        .collect::<lipsync_core::Result<Vec<_>>>()?;
    let pca = fit_pca_dims(&coords, dims)?;
    let feats = coords
        .iter()
        .map(|c| pca.transform(c))
        .collect::<lipsync_core::Result<Vec<_>>>()?;
    let mut matrix = ndarray::Array2::zeros((feats.len(), dims));
    for (i, f) in feats.iter().enumerate() {
        matrix.row_mut(i).assign(f);
    }
    let mut mouth = MouthFeatureSequence::new(matrix);
    align_streams(&mut audio, &mut mouth);
    coords.truncate(mouth.len());

    let mut out = Outputs::new();
    let dir = out.dir(&a.out)?;
    write_audio_csv(out.file(dir.join("audio_features.csv")), &audio)?;
    write_mouth_coords_csv(out.file(dir.join("mouth_coords.csv")), &coords)?;
    pca.save(out.file(dir.join("pca.bin")))?;
    write_mouth_csv(out.file(dir.join("mouth_features.csv")), &mouth)?;
    out.commit();
    println!(
        "audio frames {}, video frames {}, pca dims {}, explained variance {:.4}",
        audio.len(),
        mouth.len(),
        pca.dims(),
        pca.cumulative_ratio()
    );
    Ok(())
}

pub fn synth_data(ctx: &Context, a: SynthArgs) -> Result<()> {
    let seed = ctx.seed()?;
    let minutes = ctx.cfg.resolve(a.minutes, "minutes", 10.0)?;
    let sigma = ctx.cfg.resolve(a.noise_sigma, "noise-sigma", 0.05)?;
    let spec = OracleSpec::new(seed, sigma);
    let corpus = generate_corpus(&spec, minutes)?;

    let mut out = Outputs::new();
    let dir = out.dir(&a.out)?;
    write_audio_csv(out.file(dir.join("audio_features.csv")), &corpus.audio)?;
    write_mouth_csv(out.file(dir.join("mouth_features.csv")), &corpus.mouth)?;
    std::fs::write(
        out.file(dir.join("oracle.txt")),
        format!("seed = {seed}\nnoise_sigma = {sigma}\nfloor_mse = {}\n", oracle_floor(&spec)),
    )?;
    if a.with_face {
        let frames = corpus.mouth.len();
        synth_speech(minutes * 60.0, 16_000, seed).write_wav(out.file(dir.join("speech.wav")))?;
        let planted = planted_landmark_corpus(frames, seed)?;
        write_landmark_csv(out.file(dir.join("landmarks.csv")), &planted.frames)?;

        let count = ctx.cfg.resolve(a.template_frames, "template-frames", 25)?;
        let tdir = out.dir(dir.join("template"))?;
        let face = SyntheticFace::standard();
        let mut lms = Vec::with_capacity(count);
        for i in 0..count {
            let t = i as f64 / count.max(1) as f64 * std::f64::consts::TAU;
            let placement = Placement {
                nose: Point::new(256.0 + 6.0 * t.sin(), 250.0 + 3.0 * t.cos()),
                roll: 0.04 * t.sin(),
                scale: 150.0,
            };
            let (w, h) = face.rest_wh;
            let mouth = face.mouth(w * (1.0 + 0.1 * t.sin()), h * (1.0 + 1.5 * (1.0 - t.cos())));
            let lm = face.landmarks(&mouth, &placement, i, (MAP_SIZE, MAP_SIZE))?;
            render_portrait(&lm).save(out.file(tdir.join(format!("frame_{i:06}.png"))))?;
            lms.push(lm);
        }
        write_landmark_csv(out.file(tdir.join("landmarks.csv")), &lms)?;
    }
    out.commit();
    println!(
        "{} audio frames, {} mouth frames, oracle floor mse {:.6}",
        corpus.audio.len(),
        corpus.mouth.len(),
        oracle_floor(&spec)
    );
    Ok(())
}

pub fn train(ctx: &Context, a: TrainArgs) -> Result<()> {
    let c = &ctx.cfg;
    let preset = match a.preset {
        Some(p) => p,
        None => match c.resolve(None, "preset", "full".to_string())?.as_str() {
            "full" => Preset::Full,
            "compact" => Preset::Compact,
            other => bail!("unknown preset {other:?}"),
        },
    };
    let defaults = TrainConfig::default();
    let seed = ctx.seed()?;
    let cfg = TrainConfig {
        epochs: c.resolve(a.epochs, "epochs", defaults.epochs)?,
        batch_size: c.resolve(a.batch_size, "batch-size", defaults.batch_size)?,
        learning_rate: c.resolve(a.lr, "lr", defaults.learning_rate)?,
        final_learning_rate: c.resolve_opt(a.final_lr, "final-lr")?,
        seed,
        ..defaults
    };
    let base = LossWeights::default();
    let weights = LossWeights::new(
        c.resolve(a.lambda1, "lambda1", base.lambda1)?,
        c.resolve(a.lambda2, "lambda2", base.lambda2)?,
    )?;
    let hop = c.resolve(a.train_hop, "train-hop", DEFAULT_TRAIN_HOP)?;

    let (audio, mouth) = read_pair(&a.audio, &a.mouth)?;
    let windows = make_training_windows(&audio, &mouth, hop)?;
    ensure!(!windows.is_empty(), "corpus shorter than one {VIDEO_WINDOW}-frame window");
    let (gcfg, dcfg) = match preset {
        Preset::Full => (GeneratorConfig::default(), DiscriminatorConfig::default()),
        Preset::Compact => (GeneratorConfig::compact(), DiscriminatorConfig::compact()),
    };
    let g = Generator::new(gcfg, seed)?;
    let d = Discriminator::new(dcfg, seed.wrapping_add(1))?;

    let mut out = Outputs::new();
    let dir = out.dir(&a.out)?;
    let quiet = a.quiet;
    let outcome = train_with_progress(g, d, &windows, weights, &cfg, |e| {
        if !quiet {
            eprintln!(
                "epoch {:>4}  l2 {:.5}  int {:.5}  gan {:.4}  d {:.4}  val_mse {:.5}",
                e.epoch, e.l2, e.int, e.g_gan, e.d_loss, e.val_mse
            );
        }
    })?;
    outcome.generator.to_checkpoint().save(out.file(dir.join("generator.ckpt")))?;
    outcome.discriminator.to_checkpoint().save(out.file(dir.join("discriminator.ckpt")))?;
    outcome.log.save(out.file(dir.join("train_log.csv")))?;
    out.commit();
    if let Some(last) = outcome.log.last() {
        println!(
            "trained {} epochs on {} windows; val mse {:.5} mae {:.5} int-mse {:.5}",
            cfg.epochs,
            windows.len(),
            last.val_mse,
            last.val_mae,
            last.val_int_mse
        );
    }
    Ok(())
}

pub fn infer(ctx: &Context, a: InferArgs) -> Result<()> {
    let g = load_generator(&a.checkpoint)?;
    let audio = read_audio_any(&a.audio).with_context(|| format!("reading {}", a.audio.display()))?;
    let frames = audio.len() / RATE_RATIO;
    ensure!(
        frames >= VIDEO_WINDOW,
        "audio covers {frames} video frames; at least {VIDEO_WINDOW} are needed"
    );
    let x = audio.frames().slice(s![..frames * RATE_RATIO, ..]).to_owned();
    let mouth = if a.single_pass {
        MouthFeatureSequence::new(g.forward_sequence(&x)?)
    } else {
        let overlap = ctx.cfg.resolve(a.output_overlap, "output-overlap", DEFAULT_OUTPUT_OVERLAP)?;
        infer_overlapped(&x, OverlapConfig::new(overlap)?, |w| g.forward(w))?
    };
    ensure!(mouth.len() == frames, "predicted {} frames, expected {frames}", mouth.len());

    let mut out = Outputs::new();
    if let Some(parent) = a.out.parent() {
        out.dir(parent)?;
    }
    write_mouth_csv(out.file(&a.out), &mouth)?;
    out.commit();
    println!("wrote {} mouth frames to {}", mouth.len(), a.out.display());
    Ok(())
}

pub fn fit_jaw(ctx: &Context, a: FitJawArgs) -> Result<()> {
    let size = image_size(ctx, a.image_width, a.image_height)?;
    let frames = read_landmark_csv(&a.landmarks, size)
        .with_context(|| format!("reading {}", a.landmarks.display()))?;
    let reg = fit_jaw_model(&harvest_jaw_samples(&frames)?)?;
    let mut out = Outputs::new();
    if let Some(parent) = a.out.parent() {
        out.dir(parent)?;
    }
    reg.save(out.file(&a.out))?;
    out.commit();
    println!("fitted jaw regression on {} frames", frames.len());
    Ok(())
}

pub fn render_maps(ctx: &Context, a: RenderArgs) -> Result<()> {
    let low = ctx.cfg.resolve(a.canny_low, "canny-low", DEFAULT_LOW)?;
    let high = ctx.cfg.resolve(a.canny_high, "canny-high", DEFAULT_HIGH)?;
    let mouth = read_mouth_csv(&a.mouth).with_context(|| format!("reading {}", a.mouth.display()))?;
    let templates = load_template_dir(&a.template, low, high)
        .with_context(|| format!("loading template {}", a.template.display()))?;
    let reg = JawRegressor::load(&a.jaw).with_context(|| format!("loading {}", a.jaw.display()))?;
    let pca = PcaModel::load(&a.pca).with_context(|| format!("loading {}", a.pca.display()))?;
    ensure!(!templates.is_empty(), "template directory has no frames");
    ensure!(
        a.cycle || templates.len() >= mouth.len(),
        "{} mouth frames but only {} template frames; pass --cycle to reuse them",
        mouth.len(),
        templates.len()
    );
    let placements = templates
        .iter()
        .map(|t| Placement::from_frame(&t.landmarks, NormalizeOptions::default()))
        .collect::<lipsync_core::Result<Vec<_>>>()?;

    let mut out = Outputs::new();
    let dir = out.dir(&a.out)?;
    for (i, row) in mouth.frames().rows().into_iter().enumerate() {
        let k = i % templates.len();
        let feats = row.to_vec();
        let map = compose_map_from_features(&templates[k], &feats, &pca, &reg, &placements[k])
            .with_context(|| format!("frame {i}"))?;
        map.save_png(out.file(dir.join(format!("frame_{i:06}.png"))))?;
    }
    out.commit();
    println!("rendered {} facial maps", mouth.len());
    Ok(())
}

pub fn eval(_ctx: &Context, a: EvalArgs) -> Result<()> {
    let pred = read_mouth_csv(&a.pred).with_context(|| format!("reading {}", a.pred.display()))?;
    let target =
        read_mouth_csv(&a.target).with_context(|| format!("reading {}", a.target.display()))?;
    let m = evaluate(target.frames(), pred.frames())?;
    println!("mse {:.6}  mae {:.6}  int-mse {:.6}", m.mse, m.mae, m.int_mse);
    if let Some(path) = &a.out {
        let mut out = Outputs::new();
        if let Some(parent) = path.parent() {
            out.dir(parent)?;
        }
        std::fs::write(
            out.file(path),
            format!("metric,value\nmse,{}\nmae,{}\nint_mse,{}\n", m.mse, m.mae, m.int_mse),
        )?;
        out.commit();
    }
    Ok(())
}

pub fn plot_profile(ctx: &Context, a: ProfileArgs) -> Result<()> {
    let hop = ctx.cfg.resolve(a.train_hop, "train-hop", DEFAULT_TRAIN_HOP)?;
    let g = load_generator(&a.checkpoint)?;
    let (audio, mouth) = read_pair(&a.audio, &a.mouth)?;
    let windows = make_training_windows(&audio, &mouth, hop)?;
    let profile = per_frame_error_profile(&g, &windows)?;
    let (edge, interior) = edge_and_interior_means(&profile);

    let mut out = Outputs::new();
    let dir = out.dir(&a.out)?;
    let mut csv = String::from("position,mse\n");
    for (i, v) in profile.iter().enumerate() {
        csv.push_str(&format!("{i},{v}\n"));
    }
    std::fs::write(out.file(dir.join("profile.csv")), csv)?;
    profile_plot(&profile).save(out.file(dir.join("profile.png")))?;
    out.commit();
    println!(
        "{} windows; edge mean {edge:.6}, interior mean {interior:.6}, ratio {:.3}",
        windows.len(),
        edge / interior
    );
    Ok(())
}
