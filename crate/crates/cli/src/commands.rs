use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use voxseg::cascade::{argmax_labels, cascade, one_step};
use voxseg::crf::{crf_refine, masked_labels, refine_marginals, CrfParams};
use voxseg::net::{load_model, save_model, NetConfig, Network};
use voxseg::phantom::{generate, Phantom, PhantomSpec};
use voxseg::spectral::{coordinate_field, coordinate_field_from_channels, spectral_coordinates, CoordField, SpectralReport};
use voxseg::train::{train, train_network, RunReport, SamplingPlan, Stage, TrainImage};
use voxseg::volume::{dice, mask_from_nonzero, read_volume, write_volume, BrainMask, LabelTable, ProbMap, Volume};

use crate::cli::*;
use crate::config::{read_json, Mode, PipelineConfig, TrainFileConfig};
use crate::error::{CliError, Result};

fn existing(path: &Path) -> Result<&Path> {
    if path.exists() {
        Ok(path)
    } else {
        Err(CliError::Validation(format!("{} does not exist", path.display())))
    }
}

fn read_vol(path: &Path) -> Result<Volume> {
    Ok(read_volume(existing(path)?)?)
}

fn read_mask(path: &Path) -> Result<BrainMask> {
    Ok(mask_from_nonzero(&read_vol(path)?)?)
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| CliError::Runtime(format!("{}: {e}", dir.display())))
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| CliError::Runtime(format!("{}: {e}", path.display())))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    write_text(path, &(serde_json::to_string_pretty(value).map_err(CliError::runtime)? + "\n"))
}

fn print_json<T: Serialize>(value: &T) -> Result<()> {
    println!("{}", serde_json::to_string_pretty(value).map_err(CliError::runtime)?);
    Ok(())
}

fn load_net(path: &Path) -> Result<Network<f32>> {
    Ok(load_model(existing(path)?)?)
}

/// Spectral plus Cartesian coordinates from precomputed channels, or
/// solved from the mask.
fn coords_for(mask: &BrainMask, channels: Option<&[PathBuf]>) -> Result<CoordField> {
    match channels {
        Some(paths) => {
            let vols = paths.iter().map(|p| read_vol(p)).collect::<Result<Vec<_>>>()?;
            let data: Vec<Vec<f32>> = vols.iter().map(Volume::to_f32_vec).collect();
            for (p, v) in paths.iter().zip(&vols) {
                if v.dims() != mask.dims() {
                    return Err(CliError::Validation(format!("{}: grid {:?} differs from the mask {:?}", p.display(), v.dims(), mask.dims())));
                }
            }
            Ok(coordinate_field_from_channels(mask, [&data[0], &data[1], &data[2]]))
        }
        None => Ok(coordinate_field(mask, &spectral_coordinates(mask)?)),
    }
}

// --- phantom -------------------------------------------------------------

pub fn write_phantom(p: &Phantom, spec: &PhantomSpec, dir: &Path) -> Result<()> {
    create_dir(dir)?;
    write_volume(&p.image, dir.join("image.vvol"))?;
    write_volume(&p.seg, dir.join("seg.vvol"))?;
    write_volume(&p.mask.to_volume(p.image.spacing()), dir.join("mask.vvol"))?;
    spec.label_table()?.save(dir.join("labels.json"))?;
    write_json(&dir.join("phantom.json"), spec)
}

#[derive(Serialize)]
struct PhantomSummary {
    name: String,
    seed: u64,
    mask_voxels: usize,
    foreground_voxels: usize,
    /// Foreground to in-mask background volume ratio.
    fg_bg_ratio: f64,
}

pub fn phantom(args: &PhantomArgs) -> Result<()> {
    let mut spec = match (&args.spec, &args.suite) {
        (Some(path), _) => read_json::<PhantomSpec>(path)?,
        (None, s) => s.resolve()?,
    };
    if let Some(seed) = args.seed {
        spec.seed = seed;
    }
    let p = generate(&spec)?;
    write_phantom(&p, &spec, &args.out_dir)?;
    let fg = p.seg.labels()?.iter().filter(|&&l| l > 0).count();
    let bg = p.mask.count() - fg;
    print_json(&PhantomSummary {
        name: spec.name,
        seed: spec.seed,
        mask_voxels: p.mask.count(),
        foreground_voxels: fg,
        fg_bg_ratio: fg as f64 / bg.max(1) as f64,
    })
}

// --- spectral ------------------------------------------------------------

pub fn spectral(args: &SpectralArgs) -> Result<()> {
    let mask_vol = read_vol(&args.mask)?;
    let mask = mask_from_nonzero(&mask_vol)?;
    let sc = spectral_coordinates(&mask)?;
    create_dir(&args.out_dir)?;
    for i in 0..3 {
        write_volume(&sc.channel_volume(i, mask_vol.spacing()), args.out_dir.join(format!("coord_{}.vvol", i + 1)))?;
    }
    let report: SpectralReport = sc.report();
    write_json(&args.out_dir.join("spectral.json"), &report)?;
    print_json(&report)
}

// --- train ---------------------------------------------------------------

fn load_training_images(cfg: &TrainFileConfig) -> Result<Vec<TrainImage>> {
    cfg.images
        .iter()
        .map(|im| {
            let mask = read_mask(&im.mask)?;
            let coords = if cfg.coordinates { coords_for(&mask, im.coords.as_ref().map(|c| &c[..]))? } else { CoordField::zeros(mask.dims()) };
            Ok(TrainImage { image: read_vol(&im.image)?, seg: read_vol(&im.seg)?, mask, coords })
        })
        .collect()
}

fn max_label(images: &[TrainImage]) -> Result<usize> {
    let mut m = 0;
    for im in images {
        m = m.max(im.seg.labels()?.into_iter().max().unwrap_or(0) as usize);
    }
    if m == 0 {
        return Err(CliError::Validation("training segmentations contain no structure labels".into()));
    }
    Ok(m)
}

/// Trains the configured networks and writes them to `out_dir`. Returns the
/// model paths.
pub fn run_training(cfg: &TrainFileConfig, images: &[TrainImage]) -> Result<Vec<PathBuf>> {
    create_dir(&cfg.out_dir)?;
    let arch = cfg.arch.resolve();
    let structures = max_label(images)?;
    let (nets, report) = match cfg.mode {
        Mode::Cascade => {
            let out = train::<f32>(images, &cfg.train, &cfg.fg_plan, &cfg.structure_plan, &arch, structures)?;
            (vec![("fg.dnmd", out.fg), ("structures.dnmd", out.structures)], out.report)
        }
        Mode::OneStep => {
            let plan = SamplingPlan { stage: Stage::OneStep, ..cfg.structure_plan.clone() };
            let arch = NetConfig { class_count: structures + 1, task_count: cfg.train.neighborhood, ..arch };
            let mut report = RunReport::default();
            let net = train_network::<f32>(images, &plan, &cfg.train, &arch, &mut report)?;
            (vec![("one_step.dnmd", net)], report)
        }
    };
    write_text(&cfg.out_dir.join("report.jsonl"), &report.to_json_lines())?;
    let mut paths = Vec::new();
    for (name, net) in nets {
        let path = cfg.out_dir.join(name);
        save_model(&net, &path)?;
        paths.push(path);
    }
    Ok(paths)
}

pub fn train_cmd(args: &TrainArgs) -> Result<()> {
    let cfg: TrainFileConfig = read_json(&args.config)?;
    cfg.validate()?;
    let images = load_training_images(&cfg)?;
    let paths = run_training(&cfg, &images)?;
    print_json(&serde_json::json!({ "models": paths, "report": cfg.out_dir.join("report.jsonl") }))
}

// --- segment -------------------------------------------------------------

pub fn prob_path(dir: &Path, label: usize) -> PathBuf {
    dir.join(format!("prob_{label:02}.vvol"))
}

fn write_probs(map: &ProbMap, spacing: [f32; 3], dir: &Path) -> Result<()> {
    create_dir(dir)?;
    for l in 0..map.n_labels() {
        write_volume(&map.channel(l, spacing), prob_path(dir, l))?;
    }
    Ok(())
}

fn read_probs(dir: &Path) -> Result<ProbMap> {
    existing(dir)?;
    let mut channels = Vec::new();
    while prob_path(dir, channels.len()).exists() {
        channels.push(read_volume(prob_path(dir, channels.len()))?);
    }
    if channels.len() < 2 {
        return Err(CliError::Validation(format!("{}: expected prob_00.vvol, prob_01.vvol, ...", dir.display())));
    }
    Ok(ProbMap::from_channels(&channels)?)
}

pub struct Segmentation {
    pub probmap: ProbMap,
    pub labels: Volume,
}

pub fn segment_volume(image: &Volume, mask: &BrainMask, coords: &CoordField, models: &SegmentModels, stride: usize) -> Result<Segmentation> {
    let probmap = match models {
        SegmentModels::Cascade { fg, structures } => cascade(image, mask, coords, fg, structures, stride)?.probmap,
        SegmentModels::OneStep(net) => one_step(image, mask, coords, net, stride)?,
    };
    let labels = argmax_labels(&probmap, image.spacing());
    Ok(Segmentation { probmap, labels })
}

pub enum SegmentModels {
    Cascade { fg: Network<f32>, structures: Network<f32> },
    OneStep(Network<f32>),
}

pub fn segment(args: &SegmentArgs) -> Result<()> {
    let models = match (&args.fg_model, &args.structure_model, &args.one_step_model) {
        (Some(f), Some(s), None) => SegmentModels::Cascade { fg: load_net(f)?, structures: load_net(s)? },
        (None, None, Some(o)) => SegmentModels::OneStep(load_net(o)?),
        _ => return Err(CliError::Usage("give --fg-model and --structure-model, or --one-step-model".into())),
    };
    let image = read_vol(&args.image)?;
    let mask = read_mask(&args.mask)?;
    let coords = if args.no_coords { CoordField::zeros(mask.dims()) } else { coords_for(&mask, args.coords.as_deref())? };
    let seg = segment_volume(&image, &mask, &coords, &models, args.stride)?;
    write_volume(&seg.labels, &args.out)?;
    if let Some(dir) = &args.probs_dir {
        write_probs(&seg.probmap, image.spacing(), dir)?;
    }
    Ok(())
}

// --- crf -----------------------------------------------------------------

pub fn crf(args: &CrfArgs) -> Result<()> {
    let params: CrfParams = match &args.params {
        Some(p) => read_json(p)?,
        None => CrfParams::default(),
    };
    params.validate()?;
    let probmap = read_probs(&args.probs_dir)?;
    let image = read_vol(&args.image)?;
    let mask = read_mask(&args.mask)?;
    match &args.q_dir {
        None => write_volume(&crf_refine(&probmap, &image, &mask, &params)?, &args.out)?,
        Some(dir) => {
            let state = refine_marginals(&probmap, &image, &mask, &params)?;
            write_volume(&masked_labels(&state, &mask, image.spacing())?, &args.out)?;
            write_probs(&state.to_probmap(), image.spacing(), dir)?;
        }
    }
    Ok(())
}

// --- evaluate ------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LabelScore {
    pub id: u16,
    pub name: String,
    pub dice: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Evaluation {
    pub labels: Vec<LabelScore>,
    pub median: f64,
    pub mean: f64,
}

impl Evaluation {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("id,name,dice\n");
        for s in &self.labels {
            out.push_str(&format!("{},{},{:.6}\n", s.id, s.name.replace(',', " "), s.dice));
        }
        out.push_str(&format!(",median,{:.6}\n,mean,{:.6}\n", self.median, self.mean));
        out
    }
}

/// Per-label Dice over the table's labels, or over every nonzero label in
/// either volume.
pub fn evaluate_volumes(seg: &Volume, truth: &Volume, table: Option<&LabelTable>) -> Result<Evaluation> {
    let ids: Vec<(u16, String)> = match table {
        Some(t) => t.entries().iter().map(|e| (e.id, e.name.clone())).collect(),
        None => {
            let mut ids: Vec<u16> = seg.labels()?.into_iter().chain(truth.labels()?).filter(|&l| l > 0).collect();
            ids.sort_unstable();
            ids.dedup();
            ids.into_iter().map(|i| (i, format!("label_{i}"))).collect()
        }
    };
    let mut labels = Vec::with_capacity(ids.len());
    for (id, name) in ids {
        labels.push(LabelScore { id, name, dice: dice(seg, truth, id)? });
    }
    let mut d: Vec<f64> = labels.iter().map(|s| s.dice).collect();
    d.sort_by(f64::total_cmp);
    let (median, mean) = if d.is_empty() {
        (f64::NAN, f64::NAN)
    } else {
        let n = d.len();
        let median = if n % 2 == 1 { d[n / 2] } else { 0.5 * (d[n / 2 - 1] + d[n / 2]) };
        (median, d.iter().sum::<f64>() / n as f64)
    };
    Ok(Evaluation { labels, median, mean })
}

pub fn evaluate(args: &EvaluateArgs) -> Result<()> {
    let seg = read_vol(&args.seg)?;
    let truth = read_vol(&args.truth)?;
    let table = match &args.labels {
        Some(p) => Some(LabelTable::load(existing(p)?)?),
        None => None,
    };
    let eval = evaluate_volumes(&seg, &truth, table.as_ref())?;
    if let Some(p) = &args.csv {
        write_text(p, &eval.to_csv())?;
    }
    match &args.json {
        Some(p) => write_json(p, &eval),
        None => print_json(&eval),
    }
}

// --- inspect-model -------------------------------------------------------

/// Integer with thousands separators.
pub fn grouped(n: usize) -> String {
    let s = n.to_string();
    let mut out = String::new();
    for (i, ch) in s.chars().enumerate() {
        if i > 0 && (s.len() - i) % 3 == 0 {
            out.push(',');
        }
        out.push(ch);
    }
    out
}

pub fn census_table(net: &Network<f32>) -> String {
    let rows = net.census();
    let mut out = format!("{:<12} {:<28} {:>12}  {}\n", "layer", "calculation", "parameters", "input -> output");
    for r in &rows {
        let dims = |v: &[usize]| v.iter().map(usize::to_string).collect::<Vec<_>>().join("x");
        out.push_str(&format!("{:<12} {:<28} {:>12}  {} -> {}\n", r.name, r.calculation, grouped(r.params), dims(&r.input), dims(&r.output)));
    }
    out.push_str(&format!("total {}\n", grouped(net.census_total())));
    out
}

pub fn inspect_model(args: &InspectArgs) -> Result<()> {
    let net = match &args.model {
        Some(p) => load_net(p)?,
        None => {
            let mut rng = <rand_chacha::ChaCha8Rng as rand::SeedableRng>::seed_from_u64(0);
            Network::build(&NetConfig::canonical(args.classes, args.tasks), &mut rng)?
        }
    };
    if args.json {
        print_json(&serde_json::json!({ "layers": net.census(), "total": net.census_total() }))
    } else {
        print!("{}", census_table(&net));
        Ok(())
    }
}

// --- pipeline ------------------------------------------------------------

#[derive(Serialize)]
struct PipelineSummary {
    pre_crf: Evaluation,
    post_crf: Evaluation,
}

pub fn pipeline(args: &PipelineArgs) -> Result<()> {
    let cfg: PipelineConfig = read_json(&args.config)?;
    cfg.validate()?;
    let spec = cfg.phantom.resolve()?;
    let out = &cfg.out_dir;

    log::info!("phantom {}", spec.name);
    let train_spec = spec.with_seed(cfg.train_seed);
    let test_spec = spec.with_seed(cfg.test_seed);
    let train_p = generate(&train_spec)?;
    let test_p = generate(&test_spec)?;
    write_phantom(&train_p, &train_spec, &out.join("train"))?;
    write_phantom(&test_p, &test_spec, &out.join("test"))?;

    log::info!("spectral coordinates");
    let coords_of = |p: &Phantom, dir: &Path| -> Result<CoordField> {
        let sc = spectral_coordinates(&p.mask)?;
        for i in 0..3 {
            write_volume(&sc.channel_volume(i, p.image.spacing()), dir.join(format!("coord_{}.vvol", i + 1)))?;
        }
        write_json(&dir.join("spectral.json"), &sc.report())?;
        Ok(coordinate_field(&p.mask, &sc))
    };
    let train_coords = coords_of(&train_p, &out.join("train"))?;
    let test_coords = coords_of(&test_p, &out.join("test"))?;

    log::info!("training");
    let tcfg = TrainFileConfig {
        images: Vec::new(),
        out_dir: out.join("models"),
        mode: Mode::Cascade,
        train: cfg.train.clone(),
        fg_plan: cfg.fg_plan.clone(),
        structure_plan: cfg.structure_plan.clone(),
        arch: cfg.arch.clone(),
        coordinates: true,
        threads: cfg.threads,
    };
    let images = [TrainImage { image: train_p.image, seg: train_p.seg, mask: train_p.mask, coords: train_coords }];
    let paths = run_training(&tcfg, &images)?;
    let models = SegmentModels::Cascade { fg: load_net(&paths[0])?, structures: load_net(&paths[1])? };

    log::info!("segmentation");
    let seg = segment_volume(&test_p.image, &test_p.mask, &test_coords, &models, cfg.stride)?;
    write_volume(&seg.labels, out.join("labels.vvol"))?;
    write_probs(&seg.probmap, test_p.image.spacing(), &out.join("probs"))?;

    log::info!("CRF refinement");
    let refined = crf_refine(&seg.probmap, &test_p.image, &test_p.mask, &cfg.crf)?;
    write_volume(&refined, out.join("labels_crf.vvol"))?;

    let table = test_spec.label_table()?;
    let summary = PipelineSummary {
        pre_crf: evaluate_volumes(&seg.labels, &test_p.seg, Some(&table))?,
        post_crf: evaluate_volumes(&refined, &test_p.seg, Some(&table))?,
    };
    write_text(&out.join("dice_pre_crf.csv"), &summary.pre_crf.to_csv())?;
    write_text(&out.join("dice_post_crf.csv"), &summary.post_crf.to_csv())?;
    write_json(&out.join("summary.json"), &summary)?;
    print_json(&summary)
}
