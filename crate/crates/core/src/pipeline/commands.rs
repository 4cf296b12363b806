use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use rayon::prelude::*;

use crate::evaluation::{
    cmc_curve, correspondence_accuracy, dense_match_colors, read_features, read_symmetry, write_colored_points, EvalCurve,
    FeaturePointSet, ShapeDescriptors,
};
use crate::geometry::io::{write_labels, write_obj};
use crate::geometry::{
    area_weighted_sample, bounding_sphere, closest_surface_point, load_mesh, load_xyz, minimal_sphere, KdTree, PointCloud,
    PointSample, TriangleMesh, Vec3,
};
use crate::network::io::{read_descriptors, read_model, write_descriptors, write_loss_log, write_model};
use crate::network::{embed_points, train, DescriptorModel, StackInput, TrainConfig, TrainShape, TrainingData};
use crate::registration::{generate_pair_correspondences, CorrespondenceSet, LabeledPointSet, RegistrationError};
use crate::render::Scene;
use crate::seed::{item_seed, stage_seed};
use crate::synthetic::{random_rotation, toy_shape, ToyClass};
use crate::viewselect::{ViewError, ViewStackBuilder};

use super::samples::{read_samples, write_samples};
use super::{Manifest, ManifestEntry, PipelineConfig, PipelineError};

fn create(path: &Path) -> Result<BufWriter<File>, PipelineError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    let f = File::create(path).map_err(|e| PipelineError::Input(format!("{}: {e}", path.display())))?;
    Ok(BufWriter::new(f))
}

fn open(path: &Path) -> Result<BufReader<File>, PipelineError> {
    let f = File::open(path).map_err(|e| PipelineError::Input(format!("{}: {e}", path.display())))?;
    Ok(BufReader::new(f))
}

fn samples_path(dir: &Path, id: u32) -> PathBuf {
    dir.join(format!("{id}.samples"))
}

/// A mesh or a point cloud loaded from disk.
enum Geometry {
    Mesh(TriangleMesh),
    Cloud { cloud: PointCloud, ball_radius: f64 },
}

impl Geometry {
    fn load(path: &Path, labels: Option<&Path>, ball_fraction: f64) -> Result<Self, PipelineError> {
        if path.extension().is_some_and(|e| e.eq_ignore_ascii_case("xyz")) {
            let cloud = load_xyz(path)?;
            if cloud.points.is_empty() {
                return Err(PipelineError::Input(format!("{}: empty point cloud", path.display())));
            }
            let ball_radius = ball_fraction * minimal_sphere(&cloud.points).radius;
            Ok(Geometry::Cloud { cloud, ball_radius })
        } else {
            Ok(Geometry::Mesh(load_mesh(path, labels)?))
        }
    }

    fn of(entry: &ManifestEntry, cfg: &PipelineConfig) -> Result<Self, PipelineError> {
        Self::load(&entry.mesh, entry.labels.as_deref(), cfg.view.ball_radius)
            .map_err(|e| PipelineError::Input(format!("shape {}: {e}", entry.shape_id)))
    }

    fn scene(&self) -> Scene<'_> {
        match self {
            Geometry::Mesh(m) => Scene::Mesh(m),
            Geometry::Cloud { cloud, ball_radius } => Scene::Cloud { cloud, ball_radius: *ball_radius },
        }
    }

    fn radius(&self) -> Result<f64, PipelineError> {
        Ok(match self {
            Geometry::Mesh(m) => bounding_sphere(m)?.radius,
            Geometry::Cloud { cloud, .. } => minimal_sphere(&cloud.points).radius,
        })
    }

    /// Area-weighted samples of a mesh; every point of a cloud.
    fn samples(&self, n: usize, seed: u64) -> Result<Vec<PointSample>, PipelineError> {
        Ok(match self {
            Geometry::Mesh(m) => area_weighted_sample(m, n, seed)?,
            Geometry::Cloud { cloud, .. } => cloud_samples(cloud, 0..cloud.points.len()),
        })
    }

    /// Surface point nearest to `p`.
    fn snap(&self, p: &Vec3, tree: Option<&KdTree>) -> Result<PointSample, PipelineError> {
        Ok(match self {
            Geometry::Mesh(m) => closest_surface_point(m, p)?,
            Geometry::Cloud { cloud, .. } => {
                let i = tree.and_then(|t| t.closest(p)).expect("non-empty cloud");
                cloud_samples(cloud, i..i + 1).remove(0)
            }
        })
    }
}

fn cloud_samples(cloud: &PointCloud, range: std::ops::Range<usize>) -> Vec<PointSample> {
    range
        .map(|i| PointSample {
            position: cloud.points[i],
            normal: cloud.normals.as_ref().map_or(Vec3::zeros(), |n| n[i]),
            face_id: i as u32,
            label: None,
        })
        .collect()
}

/// Writes `<id>.samples` for every shape. Clouds contribute all their points.
pub fn cmd_sample(manifest: &Manifest, n_points: usize, seed: u64, cfg: &PipelineConfig, out: &Path) -> Result<usize, PipelineError> {
    if n_points == 0 {
        return Err(PipelineError::Config("need at least one sample point".into()));
    }
    let stage = stage_seed(seed, "sample");
    let written: Vec<usize> = manifest
        .entries
        .par_iter()
        .map(|e| {
            let g = Geometry::of(e, cfg)?;
            let s = g.samples(n_points, item_seed(stage, e.shape_id as u64))?;
            let mut w = create(&samples_path(out, e.shape_id))?;
            write_samples(&s, &mut w)?;
            w.flush()?;
            Ok(s.len())
        })
        .collect::<Result<_, PipelineError>>()?;
    Ok(written.len())
}

fn load_samples(dir: &Path, id: u32) -> Result<Vec<PointSample>, PipelineError> {
    read_samples(open(&samples_path(dir, id))?).map_err(|e| PipelineError::Input(format!("shape {id}: {e}")))
}

/// Which shape pairs to register.
#[derive(Debug, Clone, PartialEq)]
pub enum PairSpec {
    List(Vec<(u32, u32)>),
    AllPerCategory,
}

impl PairSpec {
    /// `a b` per line.
    pub fn read(path: &Path) -> Result<Self, PipelineError> {
        let text = fs::read_to_string(path).map_err(|e| PipelineError::Input(format!("{}: {e}", path.display())))?;
        let mut pairs = Vec::new();
        for (i, line) in text.lines().enumerate() {
            let t = line.split('#').next().unwrap_or("").trim();
            if t.is_empty() {
                continue;
            }
            let f: Vec<u32> = t
                .split_whitespace()
                .map(|v| v.parse())
                .collect::<Result<_, _>>()
                .map_err(|_| PipelineError::Input(format!("pairs line {}: expected two shape ids", i + 1)))?;
            if f.len() != 2 {
                return Err(PipelineError::Input(format!("pairs line {}: expected two shape ids", i + 1)));
            }
            pairs.push((f[0], f[1]));
        }
        Ok(PairSpec::List(pairs))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegisterSummary {
    /// `(category, #shapes, #pairs, #correspondences)` per category.
    pub rows: Vec<(String, usize, usize, usize)>,
    pub skipped: Vec<(u32, u32, String)>,
}

/// Registers shape pairs from their sample files. Writes
/// `correspondences.txt`, `stats.csv` and `skipped.txt`.
pub fn cmd_register(
    manifest: &Manifest,
    samples_dir: &Path,
    pairs: &PairSpec,
    cfg: &PipelineConfig,
    out: &Path,
) -> Result<RegisterSummary, PipelineError> {
    let pairs: Vec<(u32, u32)> = match pairs {
        PairSpec::List(p) => p.clone(),
        PairSpec::AllPerCategory => {
            let mut p = Vec::new();
            for (i, a) in manifest.entries.iter().enumerate() {
                for b in &manifest.entries[i + 1..] {
                    if a.category == b.category {
                        p.push((a.shape_id.min(b.shape_id), a.shape_id.max(b.shape_id)));
                    }
                }
            }
            p.sort_unstable();
            p
        }
    };
    let mut needed: Vec<u32> = pairs.iter().flat_map(|&(a, b)| [a, b]).collect();
    needed.sort_unstable();
    needed.dedup();
    let mut sets = BTreeMap::new();
    for id in needed {
        if manifest.get(id).is_none() {
            return Err(PipelineError::Input(format!("shape {id} is not in the manifest")));
        }
        let s = load_samples(samples_dir, id)?;
        let labels = s
            .iter()
            .map(|p| p.label)
            .collect::<Option<Vec<u32>>>()
            .ok_or_else(|| PipelineError::Input(format!("shape {id}: samples carry no part labels")))?;
        sets.insert(id, LabeledPointSet::new(id, s.iter().map(|p| p.position).collect(), labels)?);
    }
    let results: Vec<Result<CorrespondenceSet, RegistrationError>> = pairs
        .par_iter()
        .map(|(a, b)| generate_pair_correspondences(&sets[a], &sets[b], &cfg.registration).map(|r| r.0))
        .collect();

    let mut all = CorrespondenceSet::default();
    let mut skipped = Vec::new();
    let mut per_cat: BTreeMap<String, (std::collections::BTreeSet<u32>, usize, usize)> = BTreeMap::new();
    for e in &manifest.entries {
        per_cat.entry(e.category.clone()).or_default();
    }
    for (&(a, b), r) in pairs.iter().zip(results) {
        match r {
            Ok(set) => {
                let cat = &manifest.get(a).unwrap().category;
                let row = per_cat.entry(cat.clone()).or_default();
                row.0.insert(a);
                row.0.insert(b);
                row.1 += 1;
                row.2 += set.len();
                all.pairs.extend(set.pairs);
            }
            Err(e @ RegistrationError::NoSharedLabels { .. }) => skipped.push((a, b, e.to_string())),
            Err(e) => return Err(PipelineError::from(e)),
        }
    }
    fs::create_dir_all(out)?;
    let mut w = create(&out.join("correspondences.txt"))?;
    all.write_text(&mut w)?;
    w.flush()?;
    let rows: Vec<(String, usize, usize, usize)> = per_cat.into_iter().map(|(c, (s, p, n))| (c, s.len(), p, n)).collect();
    let mut w = create(&out.join("stats.csv"))?;
    writeln!(w, "category,shapes,pairs,correspondences")?;
    for (c, s, p, n) in &rows {
        writeln!(w, "{c},{s},{p},{n}")?;
    }
    w.flush()?;
    let mut w = create(&out.join("skipped.txt"))?;
    for (a, b, why) in &skipped {
        writeln!(w, "{a} {b} {why}")?;
    }
    w.flush()?;
    Ok(RegisterSummary { rows, skipped })
}

fn view_seed(cfg: &PipelineConfig, id: u32) -> u64 {
    item_seed(stage_seed(cfg.seed, "views"), id as u64)
}

/// Stacks of `samples` at the network's input resolution; `None` where a
/// point is hidden from every direction.
fn render_stacks(
    geometry: &Geometry,
    samples: &[PointSample],
    cfg: &PipelineConfig,
    id: u32,
) -> Result<Vec<Option<StackInput>>, PipelineError> {
    let builder = ViewStackBuilder::new(geometry.scene(), samples, cfg.view.clone(), view_seed(cfg, id))?;
    let res = cfg.network.input_resolution;
    (0..samples.len())
        .into_par_iter()
        .map(|i| match builder.stack(i) {
            Ok(s) => Ok(Some(StackInput::from_view_stack(&s, res)?)),
            Err(ViewError::ZeroVisibility { .. }) => Ok(None),
            Err(e) => Err(e.into()),
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainSummary {
    pub shapes: usize,
    pub correspondences: usize,
    pub losses: Vec<f64>,
}

/// Trains a fresh model on the correspondences and writes it with its loss
/// log. Stacks are rendered for every sample of every shape involved.
pub fn cmd_train(
    manifest: &Manifest,
    samples_dir: &Path,
    correspondences: &Path,
    cfg: &PipelineConfig,
    model_out: &Path,
    loss_out: &Path,
    mut progress: impl FnMut(usize, f64),
) -> Result<TrainSummary, PipelineError> {
    let set = CorrespondenceSet::read_text(open(correspondences)?)?;
    if set.is_empty() {
        return Err(PipelineError::Input(format!("{}: no correspondences", correspondences.display())));
    }
    let mut ids: Vec<u32> = set.pairs.iter().flat_map(|c| [c.shape_a, c.shape_b]).collect();
    ids.sort_unstable();
    ids.dedup();
    let mut shapes = Vec::with_capacity(ids.len());
    for &id in &ids {
        let entry = manifest.get(id).ok_or_else(|| PipelineError::Input(format!("shape {id} is not in the manifest")))?;
        let g = Geometry::of(entry, cfg)?;
        let samples = load_samples(samples_dir, id)?;
        let stacks = render_stacks(&g, &samples, cfg, id)?;
        shapes.push(TrainShape {
            shape_id: id,
            positions: samples.iter().map(|s| s.position).collect(),
            stacks,
        });
    }
    let data = TrainingData::new(shapes, &set);
    let model = DescriptorModel::new(cfg.network.clone(), stage_seed(cfg.seed, "init"))?;
    let tc = TrainConfig {
        seed: stage_seed(cfg.seed, "train"),
        ..cfg.training.clone()
    };
    let outcome = train(model, &data, &tc, &mut progress)?;
    let mut w = create(model_out)?;
    write_model(&outcome.model, &mut w)?;
    w.flush()?;
    let mut w = create(loss_out)?;
    write_loss_log(&outcome.losses, &mut w)?;
    w.flush()?;
    Ok(TrainSummary {
        shapes: ids.len(),
        correspondences: set.len(),
        losses: outcome.losses,
    })
}

/// Which points of each shape to describe.
#[derive(Debug, Clone, Default)]
pub struct EmbedInputs {
    /// Directory of `<id>.samples` files.
    pub samples_dir: Option<PathBuf>,
    /// `shape_id feature_id x y z` file; features are snapped to the surface.
    pub features: Option<PathBuf>,
}

pub fn load_model(path: &Path) -> Result<DescriptorModel, PipelineError> {
    read_model(open(path)?).map_err(|e| PipelineError::Input(format!("model {}: {e}", path.display())))
}

/// Describes the requested points of every shape. Writes `<id>.desc`
/// (descriptors) and `<id>.points` (one `s index x y z` or `f feature x y z`
/// line per descriptor, after a `# scale R` header). Hidden points are left
/// out. Returns the number of descriptors written.
pub fn cmd_embed(
    manifest: &Manifest,
    model: &DescriptorModel,
    inputs: &EmbedInputs,
    cfg: &PipelineConfig,
    out: &Path,
) -> Result<usize, PipelineError> {
    if inputs.samples_dir.is_none() && inputs.features.is_none() {
        return Err(PipelineError::Input("nothing to embed: give samples, features or both".into()));
    }
    let features = match &inputs.features {
        Some(p) => read_features(open(p)?)?,
        None => BTreeMap::new(),
    };
    let cfg = PipelineConfig {
        network: model.config().clone(),
        ..cfg.clone()
    };
    fs::create_dir_all(out)?;
    let mut total = 0;
    for e in &manifest.entries {
        let g = Geometry::of(e, &cfg)?;
        let mut points = Vec::new();
        let mut tags = Vec::new();
        if let Some(dir) = &inputs.samples_dir {
            for (i, s) in load_samples(dir, e.shape_id)?.into_iter().enumerate() {
                points.push(s);
                tags.push(('s', i as u32));
            }
        }
        if let Some(fs) = features.get(&e.shape_id) {
            let tree = match &g {
                Geometry::Cloud { cloud, .. } => Some(KdTree::new(&cloud.points)),
                Geometry::Mesh(_) => None,
            };
            for (&f, p) in fs {
                points.push(g.snap(p, tree.as_ref())?);
                tags.push(('f', f));
            }
        }
        let rows = describe(&g, &points, model, &cfg, e.shape_id)?;
        let mut desc = Vec::new();
        let mut w = create(&out.join(format!("{}.points", e.shape_id)))?;
        writeln!(w, "# scale {}", g.radius()?)?;
        for ((kind, id), (s, d)) in tags.iter().zip(points.iter().zip(rows)) {
            if let Some(d) = d {
                let p = s.position;
                writeln!(w, "{kind} {id} {} {} {}", p.x, p.y, p.z)?;
                desc.push(d);
            }
        }
        w.flush()?;
        let mut w = create(&out.join(format!("{}.desc", e.shape_id)))?;
        write_descriptors(&desc, model.output_dim(), &mut w)?;
        w.flush()?;
        total += desc.len();
    }
    Ok(total)
}

/// Descriptors of `points` on one shape, `None` for hidden points.
fn describe(
    g: &Geometry,
    points: &[PointSample],
    model: &DescriptorModel,
    cfg: &PipelineConfig,
    id: u32,
) -> Result<Vec<Option<Vec<f64>>>, PipelineError> {
    if points.is_empty() {
        return Ok(Vec::new());
    }
    let builder = ViewStackBuilder::new(g.scene(), points, cfg.view.clone(), view_seed(cfg, id))?;
    let indices: Vec<usize> = (0..points.len()).collect();
    embed_points(&builder, &indices, model, id)
        .into_iter()
        .map(|r| match r {
            Ok(d) => Ok(Some(d.values)),
            Err(crate::network::NetworkError::View(ViewError::ZeroVisibility { .. })) => Ok(None),
            Err(e) => Err(e.into()),
        })
        .collect()
}

fn read_points(path: &Path) -> Result<(f64, Vec<(char, u32, Vec3)>), PipelineError> {
    let text = fs::read_to_string(path).map_err(|e| PipelineError::Input(format!("{}: {e}", path.display())))?;
    let mut scale = None;
    let mut rows = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let bad = || PipelineError::Input(format!("{} line {}: malformed", path.display(), i + 1));
        if let Some(s) = line.strip_prefix("# scale ") {
            scale = Some(s.trim().parse::<f64>().map_err(|_| bad())?);
            continue;
        }
        let f: Vec<&str> = line.split_whitespace().collect();
        if f.is_empty() {
            continue;
        }
        let kind = match f[0] {
            "s" => 's',
            "f" => 'f',
            _ => return Err(bad()),
        };
        if f.len() != 5 {
            return Err(bad());
        }
        let id = f[1].parse().map_err(|_| bad())?;
        let v: Vec<f64> = f[2..].iter().map(|s| s.parse()).collect::<Result<_, _>>().map_err(|_| bad())?;
        rows.push((kind, id, Vec3::new(v[0], v[1], v[2])));
    }
    Ok((scale.ok_or_else(|| PipelineError::Input(format!("{}: missing scale header", path.display())))?, rows))
}

/// Reads every `<id>.desc` / `<id>.points` pair in `dir`, by shape id.
fn read_descriptor_dir(dir: &Path) -> Result<Vec<ShapeDescriptors>, PipelineError> {
    let mut ids = Vec::new();
    for entry in fs::read_dir(dir).map_err(|e| PipelineError::Input(format!("{}: {e}", dir.display())))? {
        let path = entry?.path();
        if path.extension().is_some_and(|e| e == "desc") {
            if let Some(id) = path.file_stem().and_then(|s| s.to_str()).and_then(|s| s.parse::<u32>().ok()) {
                ids.push(id);
            }
        }
    }
    ids.sort_unstable();
    ids.into_iter()
        .map(|id| {
            let (scale, rows) = read_points(&dir.join(format!("{id}.points")))?;
            let desc = read_descriptors(open(&dir.join(format!("{id}.desc")))?)?;
            if desc.len() != rows.len() {
                return Err(PipelineError::Input(format!("shape {id}: {} descriptors for {} points", desc.len(), rows.len())));
            }
            let mut sd = ShapeDescriptors {
                shape_id: id,
                scale,
                samples: Vec::new(),
                features: BTreeMap::new(),
            };
            for ((kind, pid, p), d) in rows.into_iter().zip(desc) {
                match kind {
                    's' => sd.samples.push((p, d)),
                    _ => {
                        sd.features.insert(pid, (p, d));
                    }
                }
            }
            Ok(sd)
        })
        .collect()
}

/// Writes `cmc_nonsym.csv` and `accuracy_nonsym.csv`, plus the symmetric
/// pair when `symmetric` is set (which requires a symmetry file).
pub fn cmd_evaluate(
    descriptors: &Path,
    features: &Path,
    symmetry: Option<&Path>,
    symmetric: bool,
    cfg: &PipelineConfig,
    out: &Path,
) -> Result<Vec<(String, EvalCurve)>, PipelineError> {
    let sym = match (symmetry, symmetric) {
        (Some(p), _) => read_symmetry(open(p)?)?,
        (None, true) => return Err(PipelineError::Input("symmetric curves need a symmetry file".into())),
        (None, false) => BTreeMap::new(),
    };
    let descs = read_descriptor_dir(descriptors)?;
    let fp = FeaturePointSet::new(read_features(open(features)?)?, sym)?;
    let opts = &cfg.evaluation;
    let thresholds = opts.thresholds();
    let mut variants = vec![(false, "nonsym")];
    if symmetric {
        variants.push((true, "sym"));
    }
    fs::create_dir_all(out)?;
    let mut curves = Vec::new();
    for (s, tag) in variants {
        let cmc = cmc_curve(&descs, &fp, s, opts.candidates, opts.max_rank)?;
        let acc = correspondence_accuracy(&descs, &fp, s, opts.candidates, &thresholds)?;
        for (name, curve) in [(format!("cmc_{tag}"), cmc), (format!("accuracy_{tag}"), acc)] {
            let mut w = create(&out.join(format!("{name}.csv")))?;
            curve.write_csv(&mut w)?;
            w.flush()?;
            curves.push((name, curve));
        }
    }
    Ok(curves)
}

/// Dense matching of `a` (mesh or cloud) against mesh `b`. Writes
/// `a_colored.txt` and `b_colored.txt` (`x y z r g b`): A is colored by
/// position and every point of B takes the color of its nearest A point in
/// descriptor space. Returns the number of points written for A and B.
pub fn cmd_match(
    a: &Path,
    b: &Path,
    model: &DescriptorModel,
    cfg: &PipelineConfig,
    out: &Path,
) -> Result<(usize, usize), PipelineError> {
    let cfg = PipelineConfig {
        network: model.config().clone(),
        ..cfg.clone()
    };
    let seed = stage_seed(cfg.seed, "match");
    let mut sides = Vec::new();
    for (i, path) in [a, b].into_iter().enumerate() {
        let g = Geometry::load(path, None, cfg.view.ball_radius)?;
        let samples = g.samples(cfg.sample_points, item_seed(seed, i as u64))?;
        let desc = describe(&g, &samples, model, &cfg, i as u32)?;
        let (pts, ds): (Vec<Vec3>, Vec<Vec<f64>>) =
            samples.iter().zip(desc).filter_map(|(s, d)| d.map(|d| (s.position, d))).unzip();
        sides.push((pts, ds));
    }
    let (b_pts, b_desc) = sides.pop().unwrap();
    let (a_pts, a_desc) = sides.pop().unwrap();
    let (ca, cb) = dense_match_colors(&a_pts, &a_desc, &b_desc)?;
    fs::create_dir_all(out)?;
    for (name, pts, colors) in [("a_colored.txt", &a_pts, &ca), ("b_colored.txt", &b_pts, &cb)] {
        let mut w = create(&out.join(name))?;
        write_colored_points(pts, colors, &mut w)?;
        w.flush()?;
    }
    Ok((a_pts.len(), b_pts.len()))
}

/// Writes a synthetic labeled dataset of the two toy classes: OBJ meshes
/// with per-face labels, `train.manifest` (canonical pose),
/// `test.manifest` (random rotations), and `features.txt` / `symmetry.txt`
/// for the test shapes.
pub fn cmd_toy(out: &Path, train_per_class: usize, test_per_class: usize, seed: u64) -> Result<(), PipelineError> {
    let classes = [ToyClass::Wings, ToyClass::Legs];
    fs::create_dir_all(out.join("meshes"))?;
    let n_train = 2 * train_per_class;
    let mut train = Manifest { seed, entries: Vec::new() };
    let mut test = Manifest { seed, entries: Vec::new() };
    let mut features = String::new();
    let mut symmetry = BTreeMap::new();
    for i in 0..n_train + 2 * test_per_class {
        let id = i as u32;
        let class = classes[i % 2];
        let mut shape = toy_shape(class, item_seed(stage_seed(seed, "toy.shape"), id as u64));
        let is_test = i >= n_train;
        if is_test {
            shape = shape.transformed(&random_rotation(item_seed(stage_seed(seed, "toy.rotation"), id as u64)));
            for (f, p) in &shape.features {
                features.push_str(&format!("{id} {f} {} {} {}\n", p.x, p.y, p.z));
            }
            symmetry.extend(class.symmetry());
        }
        let mesh_path = out.join("meshes").join(format!("{id}.obj"));
        let label_path = out.join("meshes").join(format!("{id}.labels"));
        fs::write(&mesh_path, write_obj(&shape.mesh))?;
        fs::write(&label_path, write_labels(shape.mesh.face_labels().expect("toy shapes are labeled")))?;
        let entry = ManifestEntry {
            shape_id: id,
            category: class.name().to_string(),
            mesh: mesh_path,
            labels: Some(label_path),
        };
        if is_test { &mut test } else { &mut train }.entries.push(entry);
    }
    fs::write(out.join("train.manifest"), train.to_text(out))?;
    fs::write(out.join("test.manifest"), test.to_text(out))?;
    fs::write(out.join("features.txt"), features)?;
    let mut w = create(&out.join("symmetry.txt"))?;
    crate::evaluation::write_symmetry(&symmetry, &mut w)?;
    w.flush()?;
    Ok(())
}
