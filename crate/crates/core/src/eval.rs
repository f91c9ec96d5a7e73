//! Ranking materials for artworks, accuracies, metric series and their CSV form.

use std::collections::{BTreeSet, HashMap};
use std::fmt;
use std::io::{BufRead, Write};
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::corpus::{Artwork, ClassDescription, Dataset};
use crate::error::{Error, Result};
use crate::model::{ModelParams, Pair};
use crate::nn::tape::sigmoid;
use crate::nn::{Tensor, COSINE_EPS};
use crate::text::EmbeddedSequence;

/// Materials ranked for one artwork, best first.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub artwork_id: String,
    pub ranked: Vec<(String, f64)>,
}

impl Prediction {
    pub fn top(&self) -> Option<&str> {
        self.ranked.first().map(|(m, _)| m.as_str())
    }
}

/// Match score of two embeddings, computed exactly as the model head does.
fn head_score(u: &[f64], v: &[f64]) -> f64 {
    let dot: f64 = u.iter().zip(v).map(|(x, y)| x * y).sum();
    let nu = u.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nv = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    sigmoid(dot / (nu.max(COSINE_EPS) * nv.max(COSINE_EPS)))
}

fn rank(artwork_id: &str, descs: &[ClassDescription], image: &[f64], text: &Tensor) -> Prediction {
    let mut ranked: Vec<(String, f64)> = descs
        .iter()
        .enumerate()
        .map(|(c, d)| (d.material.clone(), head_score(image, text.row(c))))
        .collect();
    ranked.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    Prediction {
        artwork_id: artwork_id.to_string(),
        ranked,
    }
}

fn text_embeddings(params: &ModelParams, descs: &[ClassDescription]) -> Result<Tensor> {
    if descs.is_empty() {
        return Err(Error::Empty("description list"));
    }
    let seqs: Vec<&EmbeddedSequence> = descs.iter().map(|d| &d.embedded).collect();
    params.embed_descriptions(&seqs)
}

/// Scores every description against the artwork (eval-mode batch norm).
pub fn predict(
    params: &ModelParams,
    artwork: &Artwork,
    descs: &[ClassDescription],
) -> Result<Prediction> {
    let text = text_embeddings(params, descs)?;
    let image = params.embed_images(&[&artwork.features])?;
    Ok(rank(&artwork.id, descs, image.row(0), &text))
}

/// [`predict`] for every artwork of `ds`, sharing the description embeddings.
pub fn predict_all(
    params: &ModelParams,
    ds: &Dataset,
    descs: &[ClassDescription],
) -> Result<Vec<Prediction>> {
    let text = text_embeddings(params, descs)?;
    let mut out = Vec::with_capacity(ds.len());
    for chunk in ds.artworks().chunks(1024) {
        let features: Vec<&[f64]> = chunk.iter().map(|a| a.features.as_slice()).collect();
        let images = params.embed_images(&features)?;
        out.extend(
            chunk
                .iter()
                .enumerate()
                .map(|(i, a)| rank(&a.id, descs, images.row(i), &text)),
        );
    }
    Ok(out)
}

/// Fraction of `(score, label)` pairs where `score ≥ 0.5` agrees with the label.
pub fn pair_accuracy_from_scores(scores: &[f64], labels: &[bool]) -> Result<f64> {
    if scores.is_empty() {
        return Err(Error::Empty("pair stream"));
    }
    if scores.len() != labels.len() {
        return Err(Error::Shape {
            op: "pair_accuracy",
            lhs: vec![scores.len()],
            rhs: vec![labels.len()],
        });
    }
    let hits = scores
        .iter()
        .zip(labels)
        .filter(|(&s, &y)| (s >= 0.5) == y)
        .count();
    Ok(hits as f64 / scores.len() as f64)
}

/// Eval-mode match scores for `pairs` over `ds` and `descs`.
pub fn pair_scores(
    params: &ModelParams,
    ds: &Dataset,
    descs: &[ClassDescription],
    pairs: &[Pair],
) -> Result<Vec<f64>> {
    let text = text_embeddings(params, descs)?;
    let features: Vec<&[f64]> = ds
        .artworks()
        .iter()
        .map(|a| a.features.as_slice())
        .collect();
    let images = params.embed_images(&features)?;
    Ok(pairs
        .iter()
        .map(|p| head_score(images.row(p.artwork), text.row(p.class)))
        .collect())
}

/// Pairwise validation accuracy of the model at threshold 0.5.
pub fn pair_accuracy(
    params: &ModelParams,
    ds: &Dataset,
    descs: &[ClassDescription],
    pairs: &[Pair],
) -> Result<f64> {
    if pairs.is_empty() {
        return Err(Error::Empty("pair stream"));
    }
    let scores = pair_scores(params, ds, descs, pairs)?;
    let labels: Vec<bool> = pairs.iter().map(|p| p.positive).collect();
    pair_accuracy_from_scores(&scores, &labels)
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ZslMetric {
    /// The top-ranked material is one of the artwork's materials.
    #[default]
    Top1Hit,
    /// The top `|truth|` materials are exactly the artwork's materials.
    ExactSet,
}

impl fmt::Display for ZslMetric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ZslMetric::Top1Hit => "top1-hit",
            ZslMetric::ExactSet => "exact-set",
        })
    }
}

impl FromStr for ZslMetric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "top1-hit" => Ok(ZslMetric::Top1Hit),
            "exact-set" => Ok(ZslMetric::ExactSet),
            _ => Err(Error::Config(format!("unknown metric {s:?}"))),
        }
    }
}

/// Fraction of predictions that are correct under `metric`.
pub fn zsl_accuracy_with(
    preds: &[Prediction],
    truth: &HashMap<String, BTreeSet<String>>,
    metric: ZslMetric,
) -> Result<f64> {
    if preds.is_empty() {
        return Err(Error::Empty("prediction list"));
    }
    let mut hits = 0usize;
    for p in preds {
        let t = truth
            .get(&p.artwork_id)
            .ok_or_else(|| Error::MissingTruth(p.artwork_id.clone()))?;
        let hit = match metric {
            ZslMetric::Top1Hit => p.top().is_some_and(|m| t.contains(m)),
            ZslMetric::ExactSet => {
                p.ranked.len() >= t.len() && p.ranked[..t.len()].iter().all(|(m, _)| t.contains(m))
            }
        };
        hits += usize::from(hit);
    }
    Ok(hits as f64 / preds.len() as f64)
}

/// Multi-label top-1 hit rate.
pub fn zsl_accuracy(
    preds: &[Prediction],
    truth: &HashMap<String, BTreeSet<String>>,
) -> Result<f64> {
    zsl_accuracy_with(preds, truth, ZslMetric::Top1Hit)
}

/// Artwork id → material set.
pub fn truth_of(ds: &Dataset) -> HashMap<String, BTreeSet<String>> {
    ds.artworks()
        .iter()
        .map(|a| (a.id.clone(), a.materials.clone()))
        .collect()
}

/// A named `(step, value)` series with strictly increasing steps.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricSeries {
    pub name: String,
    points: Vec<(u64, f64)>,
}

impl MetricSeries {
    pub fn new(name: impl Into<String>) -> Self {
        MetricSeries {
            name: name.into(),
            points: Vec::new(),
        }
    }

    pub fn from_points(name: impl Into<String>, points: Vec<(u64, f64)>) -> Result<Self> {
        let mut s = MetricSeries::new(name);
        for (step, value) in points {
            s.push(step, value)?;
        }
        Ok(s)
    }

    pub fn push(&mut self, step: u64, value: f64) -> Result<()> {
        if let Some(&(last, _)) = self.points.last() {
            if step <= last {
                return Err(Error::Config(format!(
                    "step {step} does not follow step {last}"
                )));
            }
        }
        self.points.push((step, value));
        Ok(())
    }

    pub fn points(&self) -> &[(u64, f64)] {
        &self.points
    }

    pub fn values(&self) -> impl Iterator<Item = f64> + '_ {
        self.points.iter().map(|&(_, v)| v)
    }

    pub fn last(&self) -> Option<f64> {
        self.points.last().map(|&(_, v)| v)
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// Adjusted exponentially weighted mean with `alpha = 1 / (1 + com)`.
pub fn smooth(series: &MetricSeries, com: f64) -> Result<MetricSeries> {
    if !(com >= 0.0 && com.is_finite()) {
        return Err(Error::Config(format!(
            "centre of mass must be finite and non-negative, got {com}"
        )));
    }
    let decay = 1.0 - 1.0 / (1.0 + com);
    let (mut num, mut den) = (0.0, 0.0);
    let points = series
        .points
        .iter()
        .map(|&(step, x)| {
            num = num * decay + x;
            den = den * decay + 1.0;
            (step, num / den)
        })
        .collect();
    Ok(MetricSeries {
        name: series.name.clone(),
        points,
    })
}

pub const METRICS_HEADER: &str = "Step,Value";

/// Writes `Step,Value` rows; values use the shortest exactly round-tripping decimal.
pub fn write_metrics_csv<W: Write>(series: &MetricSeries, mut out: W) -> Result<()> {
    writeln!(out, "{METRICS_HEADER}")?;
    for (step, value) in &series.points {
        writeln!(out, "{step},{value}")?;
    }
    out.flush()?;
    Ok(())
}

pub fn write_metrics_csv_file(series: &MetricSeries, path: &Path) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    write_metrics_csv(series, std::io::BufWriter::new(file))
}

pub fn read_metrics_csv<R: BufRead>(reader: R, name: &str) -> Result<MetricSeries> {
    let mut lines = reader.lines();
    match lines.next().transpose()? {
        Some(h) if h.trim_end_matches('\r') == METRICS_HEADER => {}
        Some(h) => {
            return Err(Error::Csv {
                line: 1,
                message: format!("expected header {METRICS_HEADER:?}, found {h:?}"),
            })
        }
        None => {
            return Err(Error::Csv {
                line: 1,
                message: "missing header".into(),
            })
        }
    }
    let mut series = MetricSeries::new(name);
    for (i, line) in lines.enumerate() {
        let line = line?;
        let line = line.trim_end_matches('\r');
        let lineno = i + 2;
        if line.is_empty() {
            continue;
        }
        let bad = |message: String| Error::Csv {
            line: lineno,
            message,
        };
        let (step, value) = line
            .split_once(',')
            .ok_or_else(|| bad(format!("expected two fields in {line:?}")))?;
        let step: u64 = step
            .parse()
            .map_err(|_| bad(format!("bad step {step:?}")))?;
        let value: f64 = value
            .parse()
            .map_err(|_| bad(format!("bad value {value:?}")))?;
        series.push(step, value).map_err(|e| bad(e.to_string()))?;
    }
    Ok(series)
}

pub fn read_metrics_csv_file(path: &Path) -> Result<MetricSeries> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let name = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    read_metrics_csv(std::io::BufReader::new(file), &name)
}

/// Writes `id,rank,material,score` rows with 1-based ranks, keeping the
/// best `top_k` materials per artwork (all when `None`).
pub fn write_predictions_csv<W: Write>(
    preds: &[Prediction],
    top_k: Option<usize>,
    mut out: W,
) -> Result<()> {
    writeln!(out, "id,rank,material,score")?;
    for p in preds {
        let k = top_k.unwrap_or(p.ranked.len());
        for (r, (m, s)) in p.ranked.iter().take(k).enumerate() {
            writeln!(
                out,
                "{},{},{},{}",
                csv_field(&p.artwork_id),
                r + 1,
                csv_field(m),
                s
            )?;
        }
    }
    out.flush()?;
    Ok(())
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n', '\r']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{make_pairs, Depth, ModelConfig};
    use crate::text::Token;
    use proptest::prelude::*;

    fn pred(id: &str, ranked: &[&str]) -> Prediction {
        Prediction {
            artwork_id: id.into(),
            ranked: ranked
                .iter()
                .enumerate()
                .map(|(i, m)| (m.to_string(), 0.7 - 0.1 * i as f64))
                .collect(),
        }
    }

    fn truth(rows: &[(&str, &[&str])]) -> HashMap<String, BTreeSet<String>> {
        rows.iter()
            .map(|(id, ms)| (id.to_string(), ms.iter().map(|m| m.to_string()).collect()))
            .collect()
    }

    #[test]
    fn zsl_accuracy_examples() {
        let t = truth(&[("a", &["oak"]), ("b", &["paper", "ink"])]);
        let preds = vec![pred("a", &["oak", "ink"]), pred("b", &["ink", "oak"])];
        assert_eq!(zsl_accuracy(&preds, &t).unwrap(), 1.0);
        assert_eq!(
            zsl_accuracy_with(&preds, &t, ZslMetric::ExactSet).unwrap(),
            0.5
        );
        let preds = vec![pred("a", &["ink", "oak"]), pred("b", &["ink", "paper"])];
        assert_eq!(zsl_accuracy(&preds, &t).unwrap(), 0.5);
        assert_eq!(
            zsl_accuracy_with(&preds, &t, ZslMetric::ExactSet).unwrap(),
            0.5
        );
        assert!(matches!(zsl_accuracy(&[], &t), Err(Error::Empty(_))));
        assert!(matches!(
            zsl_accuracy(&[pred("z", &["oak"])], &t),
            Err(Error::MissingTruth(_))
        ));
    }

    #[test]
    fn metric_names_round_trip() {
        for m in [ZslMetric::Top1Hit, ZslMetric::ExactSet] {
            assert_eq!(m.to_string().parse::<ZslMetric>().unwrap(), m);
        }
        assert!("top5".parse::<ZslMetric>().is_err());
    }

    #[test]
    fn pair_accuracy_threshold_counts_ties_positive() {
        assert_eq!(
            pair_accuracy_from_scores(&[0.5; 4], &[true; 4]).unwrap(),
            1.0
        );
        assert_eq!(
            pair_accuracy_from_scores(&[0.9, 0.1], &[true, false]).unwrap(),
            1.0
        );
        assert_eq!(
            pair_accuracy_from_scores(&[0.9, 0.1], &[false, false]).unwrap(),
            0.5
        );
        assert!(pair_accuracy_from_scores(&[], &[]).is_err());
    }

    #[test]
    fn smoothing_examples() {
        let s = MetricSeries::from_points("x", vec![(0, 0.0), (1, 1.0)]).unwrap();
        let y = smooth(&s, 5.0).unwrap();
        assert!((y.points()[1].1 - 6.0 / 11.0).abs() < 1e-12);
        assert_eq!(smooth(&s, 0.0).unwrap(), s);
        let c = MetricSeries::from_points("c", (0..20).map(|i| (i, 0.25)).collect()).unwrap();
        assert!(smooth(&c, 5.0)
            .unwrap()
            .values()
            .all(|v| (v - 0.25).abs() < 1e-15));
        assert!(smooth(&s, -1.0).is_err());
    }

    #[test]
    fn csv_format() {
        let s = MetricSeries::from_points("x", vec![(0, 0.5)]).unwrap();
        let mut buf = Vec::new();
        write_metrics_csv(&s, &mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "Step,Value\n0,0.5\n");
        assert!(matches!(
            read_metrics_csv("step,value\n0,0.5\n".as_bytes(), "x"),
            Err(Error::Csv { line: 1, .. })
        ));
        assert!(matches!(
            read_metrics_csv("Step,Value\n0,abc\n".as_bytes(), "x"),
            Err(Error::Csv { line: 2, .. })
        ));
        assert!(matches!(
            read_metrics_csv("Step,Value\n2,1\n1,1\n".as_bytes(), "x"),
            Err(Error::Csv { line: 3, .. })
        ));
    }

    #[test]
    fn series_steps_increase() {
        let mut s = MetricSeries::new("x");
        s.push(3, 1.0).unwrap();
        assert!(s.push(3, 2.0).is_err());
        assert!(s.push(1, 2.0).is_err());
    }

    #[test]
    fn predictions_csv_quotes_fields() {
        let p = Prediction {
            artwork_id: "a,1".into(),
            ranked: vec![("oak".into(), 0.625), ("ink".into(), 0.5)],
        };
        let mut buf = Vec::new();
        write_predictions_csv(&[p], Some(1), &mut buf).unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            "id,rank,material,score\n\"a,1\",1,oak,0.625\n"
        );
    }

    fn desc(material: &str, rows: &[Vec<f64>]) -> ClassDescription {
        let words: Vec<Token> = (0..rows.len())
            .map(|i| Token::new(&format!("w{i}")).unwrap())
            .collect();
        let dim = rows[0].len();
        ClassDescription {
            material: material.into(),
            words: words.clone(),
            embedded: EmbeddedSequence::from_rows(words, rows, dim, 4).unwrap(),
        }
    }

    fn small_model() -> ModelParams {
        ModelParams::build(&ModelConfig {
            depth: Depth::Baseline,
            feature_dim: 3,
            embed_dim: 2,
            hidden: 6,
            ..ModelConfig::default()
        })
    }

    fn artwork(id: &str, features: Vec<f64>, materials: &[&str]) -> Artwork {
        Artwork {
            id: id.into(),
            features,
            description: String::new(),
            materials: materials.iter().map(|m| m.to_string()).collect(),
            tokens: None,
        }
    }

    #[test]
    fn predict_ranks_every_class_once() {
        let params = small_model();
        let descs = vec![
            desc("oak", &[vec![0.1, 0.4]]),
            desc("ink", &[vec![-0.3, 0.2], vec![0.5, 0.5]]),
            desc("tin", &[vec![0.9, -0.1]]),
        ];
        let a = artwork("a", vec![0.2, -0.7, 1.5], &["oak"]);
        let p = predict(&params, &a, &descs).unwrap();
        let mut names: Vec<&str> = p.ranked.iter().map(|(m, _)| m.as_str()).collect();
        names.sort();
        assert_eq!(names, ["ink", "oak", "tin"]);
        assert!(p.ranked.windows(2).all(|w| w[0].1 >= w[1].1));
        assert!(p.ranked.iter().all(|(_, s)| *s > 0.0 && *s < 1.0));
        assert_eq!(predict(&params, &a, &descs).unwrap(), p);

        let single = predict(&params, &a, &descs[..1]).unwrap();
        assert_eq!(single.top(), Some("oak"));
        assert!(matches!(predict(&params, &a, &[]), Err(Error::Empty(_))));
    }

    #[test]
    fn equal_scores_break_ties_by_name() {
        let params = small_model();
        let rows = [vec![0.3, -0.2]];
        let descs = vec![
            desc("zinc", &rows),
            desc("brass", &rows),
            desc("oak", &[vec![0.7, 0.1]]),
        ];
        let p = predict(&params, &artwork("a", vec![1.0, 0.0, 0.5], &[]), &descs).unwrap();
        let zinc = p.ranked.iter().position(|(m, _)| m == "zinc").unwrap();
        let brass = p.ranked.iter().position(|(m, _)| m == "brass").unwrap();
        assert_eq!(brass + 1, zinc);
    }

    #[test]
    fn predict_all_matches_predict() {
        let params = small_model();
        let descs = vec![
            desc("oak", &[vec![0.1, 0.4]]),
            desc("ink", &[vec![-0.3, 0.2]]),
        ];
        let ds = Dataset::new(vec![
            artwork("a", vec![0.2, -0.7, 1.5], &["oak"]),
            artwork("b", vec![-1.0, 0.3, 0.0], &["ink"]),
        ]);
        let all = predict_all(&params, &ds, &descs).unwrap();
        for (p, a) in all.iter().zip(ds.artworks()) {
            let single = predict(&params, a, &descs).unwrap();
            assert_eq!(p.artwork_id, single.artwork_id);
            for ((m1, s1), (m2, s2)) in p.ranked.iter().zip(&single.ranked) {
                assert_eq!(m1, m2);
                assert!((s1 - s2).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn random_model_is_near_chance() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        let params = ModelParams::build(&ModelConfig {
            feature_dim: 8,
            embed_dim: 4,
            hidden: 16,
            ..ModelConfig::default()
        });
        let classes = ["a", "b", "c", "d", "e", "f", "g", "h"];
        let descs: Vec<ClassDescription> = classes
            .iter()
            .map(|c| desc(c, &[(0..4).map(|_| rng.random_range(-1.0..1.0)).collect()]))
            .collect();
        let arts: Vec<Artwork> = (0..500)
            .map(|i| {
                artwork(
                    &format!("x{i}"),
                    (0..8).map(|_| rng.random_range(-1.0..1.0)).collect(),
                    &[classes[i % 8]],
                )
            })
            .collect();
        let ds = Dataset::new(arts);
        let pairs = make_pairs(&ds, &descs, 1, 5).unwrap();
        assert_eq!(pairs.len(), 1000);
        let acc = pair_accuracy(&params, &ds, &descs, &pairs).unwrap();
        assert!((0.35..=0.65).contains(&acc), "{acc}");
    }

    fn series() -> impl Strategy<Value = MetricSeries> {
        prop::collection::vec((1u64..5, -1e6f64..1e6), 0..40).prop_map(|pts| {
            let mut step = 0;
            let points = pts
                .into_iter()
                .map(|(d, v)| {
                    step += d;
                    (step, v)
                })
                .collect();
            MetricSeries::from_points("s", points).unwrap()
        })
    }

    proptest! {
        #[test]
        fn smoothing_stays_in_range(s in series(), com in 0.0f64..50.0) {
            let y = smooth(&s, com).unwrap();
            prop_assert_eq!(y.len(), s.len());
            if !s.is_empty() {
                let lo = s.values().fold(f64::INFINITY, f64::min);
                let hi = s.values().fold(f64::NEG_INFINITY, f64::max);
                let slack = 1e-9 * (hi - lo).abs().max(1.0);
                for v in y.values() {
                    prop_assert!(v >= lo - slack && v <= hi + slack);
                }
            }
        }

        #[test]
        fn csv_round_trip(s in series(), scale in prop::sample::select(vec![1.0, 1e-300, 1e300, 1.0 / 3.0])) {
            let s = MetricSeries::from_points("s", s.points().iter().map(|&(k, v)| (k, v * scale)).collect()).unwrap();
            let mut buf = Vec::new();
            write_metrics_csv(&s, &mut buf).unwrap();
            prop_assert_eq!(read_metrics_csv(&buf[..], "s").unwrap(), s);
        }

        #[test]
        fn flipped_labels_complement(scores in prop::collection::vec(0.0f64..1.0, 1..50), bits in prop::collection::vec(any::<bool>(), 50)) {
            prop_assume!(scores.iter().all(|&s| s != 0.5));
            let labels = &bits[..scores.len()];
            let flipped: Vec<bool> = labels.iter().map(|b| !b).collect();
            let a = pair_accuracy_from_scores(&scores, labels).unwrap();
            let b = pair_accuracy_from_scores(&scores, &flipped).unwrap();
            prop_assert!((a + b - 1.0).abs() < 1e-12);
        }

        #[test]
        fn zsl_accuracy_bounds(hits in prop::collection::vec(any::<bool>(), 1..30)) {
            let preds: Vec<Prediction> = hits.iter().enumerate().map(|(i, _)| pred(&i.to_string(), &["oak", "ink"])).collect();
            let t: HashMap<String, BTreeSet<String>> = hits
                .iter()
                .enumerate()
                .map(|(i, &h)| (i.to_string(), [if h { "oak" } else { "ink" }.to_string()].into()))
                .collect();
            let acc = zsl_accuracy(&preds, &t).unwrap();
            prop_assert!((0.0..=1.0).contains(&acc));
            prop_assert_eq!(acc == 1.0, hits.iter().all(|&h| h));
        }
    }
}
