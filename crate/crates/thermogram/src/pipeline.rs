//! End-to-end run over an acquisition sequence: detect the region, register
//! every frame to the first, segment, extract features, classify against a
//! gallery, and leave every intermediate artifact on disk under stable
//! names so runs can be diffed.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::classifier::{
    classify_batch, read_records_file, write_records_file, BatchReport, ClassifyMethod, Label,
    PatientRecord,
};
use crate::error::{Error, Result};
use crate::features::{extract_features, threshold};
use crate::filter::{directional_valley, FilterParams};
use crate::io::{load_image, save_image};
use crate::model::Rect;
use crate::registration::{
    register_sequence, write_transforms_file, RigidTransform2D, SearchParams, SequenceMode,
    SimilarityMetric,
};
use crate::roi::{detect_thyroid_roi, remove_residuals, RoiParams};

/// Similarity metric selector as it appears in config files.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MetricKind {
    MeanAbsDiff,
    Chamfer,
}

/// Registration block of the pipeline config. Angles are radians; the
/// chamfer metric reuses the pipeline's filter parameters.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RegistrationConfig {
    pub mode: SequenceMode,
    pub metric: MetricKind,
    pub theta_range: f64,
    pub theta_step: f64,
    pub trans_range: f64,
    pub trans_step: f64,
    pub refine_levels: u32,
}

impl Default for RegistrationConfig {
    fn default() -> Self {
        let base = SearchParams::default();
        RegistrationConfig {
            mode: SequenceMode::RoiFirst,
            metric: MetricKind::MeanAbsDiff,
            theta_range: base.theta_range,
            theta_step: base.theta_step,
            trans_range: base.trans_range,
            trans_step: base.trans_step,
            refine_levels: base.refine_levels,
        }
    }
}

impl RegistrationConfig {
    /// The search parameters this block describes, with the filter wired
    /// in for the chamfer metric.
    pub fn search_params(&self, filter: &FilterParams) -> SearchParams {
        SearchParams {
            theta_range: self.theta_range,
            theta_step: self.theta_step,
            trans_range: self.trans_range,
            trans_step: self.trans_step,
            refine_levels: self.refine_levels,
            metric: match self.metric {
                MetricKind::MeanAbsDiff => SimilarityMetric::MeanAbsDiff,
                MetricKind::Chamfer => SimilarityMetric::Chamfer { filter: *filter },
            },
        }
    }
}

/// Classifier block of the pipeline config.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct ClassifierConfig {
    pub method: MethodKind,
    pub k: usize,
    pub normalize: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MethodKind {
    Vote,
    Knn,
}

impl Default for ClassifierConfig {
    fn default() -> Self {
        ClassifierConfig {
            method: MethodKind::Vote,
            k: 3,
            normalize: false,
        }
    }
}

impl ClassifierConfig {
    pub fn method(&self) -> ClassifyMethod {
        match self.method {
            MethodKind::Vote => ClassifyMethod::Vote,
            MethodKind::Knn => ClassifyMethod::Knn {
                k: self.k,
                normalize: self.normalize,
            },
        }
    }
}

fn default_cutoff() -> u8 {
    209
}

/// Full pipeline configuration, usually loaded from a config file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    /// Input frames in acquisition order; the first is the reference.
    pub frames: Vec<PathBuf>,
    /// Labeled gallery records file.
    pub gallery: PathBuf,
    pub out_dir: PathBuf,
    #[serde(default = "default_cutoff")]
    pub cutoff: u8,
    #[serde(default)]
    pub filter: FilterParams,
    #[serde(default)]
    pub roi: RoiParams,
    #[serde(default)]
    pub registration: RegistrationConfig,
    #[serde(default)]
    pub classifier: ClassifierConfig,
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<()> {
        if self.frames.is_empty() {
            return Err(Error::InvalidParams {
                detail: "pipeline needs at least one input frame".into(),
            });
        }
        self.filter.validate()?;
        self.roi.validate()?;
        self.registration.search_params(&self.filter).validate()?;
        if self.classifier.method == MethodKind::Knn && self.classifier.k == 0 {
            return Err(Error::InvalidParams {
                detail: "k must be at least 1".into(),
            });
        }
        Ok(())
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Parse {
            what: "pipeline config".into(),
            detail: e.to_string(),
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::UnreadableFile {
            path: path.to_path_buf(),
            reason: e.to_string(),
        })?;
        Self::from_toml_str(&text)
    }
}

/// What a pipeline run produced, beyond the artifacts on disk.
#[derive(Clone, Debug)]
pub struct PipelineOutcome {
    pub roi: Rect,
    pub transforms: Vec<(usize, RigidTransform2D)>,
    pub records: Vec<PatientRecord>,
    pub report: BatchReport,
    /// Majority label over the frames; ties take frame 0's label.
    pub overall: Label,
}

fn frame_id(k: usize) -> String {
    format!("frame_{k:03}")
}

fn ensure_dir(path: &Path) -> Result<()> {
    fs::create_dir_all(path).map_err(|e| Error::UnwritableFile {
        path: path.to_path_buf(),
        reason: e.to_string(),
    })
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::UnwritableFile {
        path: path.to_path_buf(),
        reason: e.to_string(),
    })
}

/// Runs the full flow and writes, under `out_dir`: `edge_mask.png`,
/// `edge_mask_clean.png`, `roi.txt`, `transforms.txt`,
/// `registered/frame_NNN.png`, `masks/frame_NNN.png`, `features.csv`, and
/// `report.txt`. Output is a pure function of the config and input files.
pub fn run_pipeline(config: &PipelineConfig) -> Result<PipelineOutcome> {
    config.validate()?;
    let gallery = read_records_file(&config.gallery)?;
    if let ClassifyMethod::Knn { k, .. } = config.classifier.method() {
        if gallery.len() < k {
            return Err(Error::GalleryTooSmall {
                len: gallery.len(),
                k,
            });
        }
    }

    let mut frames = Vec::with_capacity(config.frames.len());
    for path in &config.frames {
        frames.push(load_image(path)?);
    }
    let reference = &frames[0];
    for f in &frames[1..] {
        if f.width() != reference.width() || f.height() != reference.height() {
            return Err(Error::DimensionMismatch {
                a_w: reference.width(),
                a_h: reference.height(),
                b_w: f.width(),
                b_h: f.height(),
            });
        }
    }

    ensure_dir(&config.out_dir)?;
    ensure_dir(&config.out_dir.join("registered"))?;
    ensure_dir(&config.out_dir.join("masks"))?;

    // Reference-frame diagnostics: the raw edge mask and the mask after
    // residual removal, i.e. what the region scan actually saw.
    let edges = directional_valley(reference, &config.filter)?;
    save_image(&edges.to_image(), &config.out_dir.join("edge_mask.png"))?;
    let cleaned = remove_residuals(
        &edges,
        config.roi.residual_w,
        config.roi.residual_h,
        config.roi.residual_passes,
    )?;
    save_image(&cleaned.to_image(), &config.out_dir.join("edge_mask_clean.png"))?;

    let (roi, registered) = if frames.len() == 1 {
        // A single frame has nothing to register against.
        let roi = detect_thyroid_roi(reference, &config.filter, &config.roi)?;
        (roi, vec![(RigidTransform2D::identity(), frames[0].clone())])
    } else {
        let sp = config.registration.search_params(&config.filter);
        let seq = register_sequence(
            &frames,
            config.registration.mode,
            &sp,
            &config.filter,
            &config.roi,
        )?;
        (seq.roi, seq.frames)
    };

    write_text(&config.out_dir.join("roi.txt"), &format!("{roi}\n"))?;
    let transforms: Vec<(usize, RigidTransform2D)> =
        registered.iter().enumerate().map(|(k, (t, _))| (k, *t)).collect();
    write_transforms_file(&config.out_dir.join("transforms.txt"), &transforms)?;

    let mut records = Vec::with_capacity(registered.len());
    for (k, (_, frame)) in registered.iter().enumerate() {
        save_image(
            frame,
            &config.out_dir.join("registered").join(format!("{}.png", frame_id(k))),
        )?;
        let crop = frame.crop(roi)?;
        let mask = threshold(&crop, config.cutoff);
        save_image(
            &mask.to_image(),
            &config.out_dir.join("masks").join(format!("{}.png", frame_id(k))),
        )?;
        let features = extract_features(frame, roi, config.cutoff)?;
        records.push(PatientRecord {
            id: frame_id(k),
            features,
            label: None,
        });
    }
    write_records_file(&config.out_dir.join("features.csv"), &records)?;

    let report = classify_batch(&records, &gallery, config.classifier.method())?;
    let mut labels = Vec::new();
    for entry in &report.entries {
        match &entry.outcome {
            Ok(p) => labels.push(p.label),
            Err(msg) => {
                return Err(Error::InvalidParams {
                    detail: format!("record {}: {}", entry.id, msg),
                })
            }
        }
    }
    let sick = labels.iter().filter(|&&l| l == Label::Sick).count();
    let overall = match (2 * sick).cmp(&labels.len()) {
        std::cmp::Ordering::Greater => Label::Sick,
        std::cmp::Ordering::Less => Label::Healthy,
        std::cmp::Ordering::Equal => labels[0],
    };

    let mut report_text = report.render();
    report_text.push_str(&format!(
        "\noverall: {} ({} sick / {} healthy frames)\n",
        overall,
        sick,
        labels.len() - sick
    ));
    write_text(&config.out_dir.join("report.txt"), &report_text)?;

    Ok(PipelineOutcome {
        roi,
        transforms,
        records,
        report,
        overall,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::classifier::format_records;
    use crate::registration::RigidTransform2D;
    use crate::synth::{generate_phantom, ColumnSpan, Nodule, PhantomSpec};

    /// A small sick phantom: bands the default filter sees, plus a hot
    /// nodule that crosses the 209 cutoff.
    fn sick_spec(frames: usize) -> PhantomSpec {
        let jitter = (0..frames)
            .map(|k| {
                if k == 0 {
                    RigidTransform2D::identity()
                } else {
                    RigidTransform2D::new(0.0, k as f64, 0.0)
                }
            })
            .collect();
        PhantomSpec {
            width: 96,
            height: 72,
            background: 170,
            band_intensity: 60,
            noise_sigma: 0.0,
            seed: 11,
            bands: [ColumnSpan { start: 20, end: 26 }, ColumnSpan { start: 70, end: 76 }],
            marker: None,
            nodule: Some(Nodule {
                center_x: 48.0,
                center_y: 40.0,
                radius: 10.0,
                peak: 80.0,
                sigma: 4.0,
            }),
            jitter,
        }
    }

    fn small_roi() -> RoiParams {
        RoiParams {
            roi_w: 64,
            roi_h: 48,
            residual_w: 16,
            residual_h: 16,
            residual_passes: 0,
            ..RoiParams::default()
        }
    }

    fn write_frames(dir: &Path, spec: &PhantomSpec) -> Vec<PathBuf> {
        let frames = generate_phantom(spec).unwrap();
        frames
            .iter()
            .enumerate()
            .map(|(k, f)| {
                let p = dir.join(format!("in_{k}.png"));
                save_image(f, &p).unwrap();
                p
            })
            .collect()
    }

    fn gallery_file(dir: &Path) -> PathBuf {
        let make = |id: &str, f: [f64; 4], label: Label| PatientRecord {
            id: id.into(),
            features: crate::features::FeatureVector {
                mean_norm: f[0],
                std_raw: f[1],
                max_norm: f[2],
                asymmetry: f[3],
            },
            label: Some(label),
        };
        // Sick rows sit near the phantom's nodule features (mean_norm
        // around 0.85, tight std); healthy rows sit far away.
        let records = vec![
            make("g_sick_a", [0.86, 4.0, 0.99, 0.05], Label::Sick),
            make("g_sick_b", [0.88, 6.0, 1.0, 0.07], Label::Sick),
            make("g_healthy_a", [0.30, 40.0, 0.40, 0.30], Label::Healthy),
            make("g_healthy_b", [0.25, 45.0, 0.35, 0.28], Label::Healthy),
        ];
        let p = dir.join("gallery.csv");
        std::fs::write(&p, format_records(&records)).unwrap();
        p
    }

    fn base_config(dir: &Path, frames: Vec<PathBuf>) -> PipelineConfig {
        PipelineConfig {
            frames,
            gallery: gallery_file(dir),
            out_dir: dir.join("out"),
            cutoff: 209,
            filter: FilterParams::default(),
            roi: small_roi(),
            registration: RegistrationConfig {
                theta_range: 0.0,
                trans_range: 4.0,
                refine_levels: 1,
                ..RegistrationConfig::default()
            },
            classifier: ClassifierConfig::default(),
        }
    }

    #[test]
    fn single_frame_run_produces_all_artifacts() {
        let tmp = tempfile::tempdir().unwrap();
        let paths = write_frames(tmp.path(), &sick_spec(1));
        let config = base_config(tmp.path(), paths);
        let outcome = run_pipeline(&config).unwrap();
        assert_eq!(outcome.transforms, vec![(0, RigidTransform2D::identity())]);
        assert_eq!(outcome.overall, Label::Sick);
        for name in [
            "edge_mask.png",
            "edge_mask_clean.png",
            "roi.txt",
            "transforms.txt",
            "features.csv",
            "report.txt",
        ] {
            assert!(config.out_dir.join(name).exists(), "{name} missing");
        }
        assert!(config.out_dir.join("registered/frame_000.png").exists());
        assert!(config.out_dir.join("masks/frame_000.png").exists());
        let report = std::fs::read_to_string(config.out_dir.join("report.txt")).unwrap();
        assert!(report.contains("overall: sick"), "{report}");
    }

    #[test]
    fn rerun_is_byte_identical() {
        let tmp = tempfile::tempdir().unwrap();
        let paths = write_frames(tmp.path(), &sick_spec(3));
        let config = base_config(tmp.path(), paths);
        run_pipeline(&config).unwrap();
        let collect = || {
            let mut files: Vec<(String, Vec<u8>)> = Vec::new();
            let mut stack = vec![config.out_dir.clone()];
            while let Some(dir) = stack.pop() {
                for entry in std::fs::read_dir(&dir).unwrap() {
                    let path = entry.unwrap().path();
                    if path.is_dir() {
                        stack.push(path);
                    } else {
                        files.push((
                            path.strip_prefix(&config.out_dir).unwrap().display().to_string(),
                            std::fs::read(&path).unwrap(),
                        ));
                    }
                }
            }
            files.sort();
            files
        };
        let first = collect();
        assert!(first.len() >= 12);
        run_pipeline(&config).unwrap();
        let second = collect();
        assert_eq!(first, second);
    }

    #[test]
    fn multi_frame_run_recovers_translation_and_improves_alignment() {
        let tmp = tempfile::tempdir().unwrap();
        let spec = sick_spec(3);
        let paths = write_frames(tmp.path(), &spec);
        let config = base_config(tmp.path(), paths);
        let outcome = run_pipeline(&config).unwrap();
        // Generation shifted frame k right by k; registration should shift
        // it back.
        for (k, t) in &outcome.transforms {
            assert!((t.t_x + *k as f64).abs() <= 1.0, "frame {k}: {t:?}");
        }
        assert_eq!(outcome.overall, Label::Sick);
    }

    #[test]
    fn cutoff_above_every_pixel_is_a_processing_error() {
        let tmp = tempfile::tempdir().unwrap();
        let mut spec = sick_spec(1);
        spec.nodule = None;
        let paths = write_frames(tmp.path(), &spec);
        let mut config = base_config(tmp.path(), paths);
        config.cutoff = 250;
        let err = run_pipeline(&config).unwrap_err();
        assert!(matches!(err, Error::EmptySegment));
        assert!(!err.is_validation());
    }

    #[test]
    fn missing_frame_list_is_a_validation_error() {
        let tmp = tempfile::tempdir().unwrap();
        let config = base_config(tmp.path(), vec![]);
        let err = run_pipeline(&config).unwrap_err();
        assert!(err.is_validation());
    }

    #[test]
    fn config_round_trips_through_toml() {
        let tmp = tempfile::tempdir().unwrap();
        let paths = write_frames(tmp.path(), &sick_spec(1));
        let config = base_config(tmp.path(), paths);
        let text = toml::to_string(&config).unwrap();
        let back = PipelineConfig::from_toml_str(&text).unwrap();
        assert_eq!(back, config);
    }

    #[test]
    fn sparse_config_text_uses_defaults() {
        let text = r#"
            frames = ["a.png"]
            gallery = "g.csv"
            out_dir = "out"
        "#;
        let config = PipelineConfig::from_toml_str(text).unwrap();
        assert_eq!(config.cutoff, 209);
        assert_eq!(config.filter, FilterParams::default());
        assert_eq!(config.roi, RoiParams::default());
        assert_eq!(config.registration, RegistrationConfig::default());
        assert_eq!(config.classifier.method, MethodKind::Vote);
    }
}
