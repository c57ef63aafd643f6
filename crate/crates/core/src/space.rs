//! Layer-wise search spaces: ordered per-layer option sets with additive
//! integer costs, architecture encoding, min/max-cost completions and the
//! cost bucketization map.
//!
//! Option costs are quantized to scaled integers ([`Cost`]) exactly once, at
//! ingestion, so every later sum, comparison and bucket key is integer-exact.
//! Within each layer the options are ordered by non-increasing cost: index 0
//! is the most expensive option and the last index the cheapest, which makes
//! the min/max completion of any prefix a pair of suffix sums.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::iter::Sum;
use std::ops::{Add, AddAssign, Sub};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Exact additive cost in scaled integer units (see [`SearchSpace::resolution`]).
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default, Serialize, Deserialize,
)]
#[serde(transparent)]
pub struct Cost(pub i64);

impl Cost {
    pub const ZERO: Cost = Cost(0);
}

impl Add for Cost {
    type Output = Cost;
    fn add(self, rhs: Cost) -> Cost {
        Cost(self.0 + rhs.0)
    }
}

impl AddAssign for Cost {
    fn add_assign(&mut self, rhs: Cost) {
        self.0 += rhs.0;
    }
}

impl Sub for Cost {
    type Output = Cost;
    fn sub(self, rhs: Cost) -> Cost {
        Cost(self.0 - rhs.0)
    }
}

impl Sum for Cost {
    fn sum<I: Iterator<Item = Cost>>(iter: I) -> Cost {
        iter.fold(Cost::ZERO, |a, b| a + b)
    }
}

impl fmt::Display for Cost {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

#[derive(Debug, Error)]
pub enum SpaceError {
    #[error("layer {layer} has no options")]
    EmptyLayer { layer: usize },
    #[error("layer {layer}: default index {default} out of range ({len} options)")]
    BadDefaultIndex {
        layer: usize,
        default: usize,
        len: usize,
    },
    #[error("layer {layer}: option costs must be non-increasing, violated at option {index}")]
    UnsortedCosts { layer: usize, index: usize },
    #[error("layer {layer}: option {index} has negative cost")]
    NegativeCost { layer: usize, index: usize },
    #[error("layer {layer}: duplicate option label {label:?}")]
    DuplicateLabel { layer: usize, label: String },
    #[error("prefix depth {depth} out of range for {layers} layers")]
    DepthOutOfRange { depth: usize, layers: usize },
    #[error("layer {layer}: option index {index} out of range ({len} options)")]
    IndexOutOfRange {
        layer: usize,
        index: usize,
        len: usize,
    },
    #[error("architecture has {got} choices, space has {expected} layers")]
    LengthMismatch { got: usize, expected: usize },
    #[error("cost {cost} outside reachable range [{min}, {max}]")]
    CostOutOfRange { cost: Cost, min: Cost, max: Cost },
    #[error("bucket count must be at least 1")]
    ZeroBuckets,
    #[error("space file: {0}")]
    Parse(String),
    #[error("space file declares {field} = {declared}, recomputed {computed}")]
    HeaderMismatch {
        field: &'static str,
        declared: String,
        computed: String,
    },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// One selectable option for a layer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptionSpec {
    pub label: String,
    pub cost: Cost,
    /// Opaque attributes (kernel size, filter counts, ...) used only for reporting.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub payload: BTreeMap<String, serde_json::Value>,
}

impl OptionSpec {
    pub fn new(label: impl Into<String>, cost: i64) -> Self {
        OptionSpec {
            label: label.into(),
            cost: Cost(cost),
            payload: BTreeMap::new(),
        }
    }
}

/// The ordered option set of one layer plus its default option.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerSpec {
    pub options: Vec<OptionSpec>,
    pub default_index: usize,
}

impl LayerSpec {
    pub fn new(options: Vec<OptionSpec>, default_index: usize) -> Self {
        LayerSpec {
            options,
            default_index,
        }
    }

    /// Options with the given integer costs, labeled `o0`, `o1`, ...
    pub fn from_costs(costs: &[i64], default_index: usize) -> Self {
        let options = costs
            .iter()
            .enumerate()
            .map(|(i, &c)| OptionSpec::new(format!("o{i}"), c))
            .collect();
        LayerSpec::new(options, default_index)
    }

    pub fn len(&self) -> usize {
        self.options.len()
    }

    pub fn is_empty(&self) -> bool {
        self.options.is_empty()
    }

    /// Maximal option cost; options are sorted non-increasing, so index 0.
    pub fn max_cost(&self) -> Cost {
        self.options.first().map(|o| o.cost).unwrap_or(Cost::ZERO)
    }

    /// Minimal option cost; the last option.
    pub fn min_cost(&self) -> Cost {
        self.options.last().map(|o| o.cost).unwrap_or(Cost::ZERO)
    }

    pub fn default_cost(&self) -> Cost {
        self.options
            .get(self.default_index)
            .map(|o| o.cost)
            .unwrap_or(Cost::ZERO)
    }
}

/// Which family of bucketization maps a search runs with.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PhiMode {
    /// Group candidates by cost range: `floor((c - min)/(max - min) * H)`.
    #[default]
    CostBucket,
    /// Every distinct prefix keeps its own slot; nothing is merged.
    UniqueId,
}

/// A full architecture: one option index per layer.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Architecture {
    pub choices: Vec<usize>,
}

impl Architecture {
    pub fn new(choices: Vec<usize>) -> Self {
        Architecture { choices }
    }

    pub fn len(&self) -> usize {
        self.choices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.choices.is_empty()
    }
}

impl fmt::Display for Architecture {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let joined = self
            .choices
            .iter()
            .map(|c| c.to_string())
            .collect::<Vec<_>>()
            .join("-");
        f.write_str(&joined)
    }
}

/// Choices fixed for the first `depth()` layers; the rest are open.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Prefix {
    pub choices: Vec<usize>,
}

impl Prefix {
    pub fn empty() -> Self {
        Prefix { choices: vec![] }
    }

    pub fn new(choices: Vec<usize>) -> Self {
        Prefix { choices }
    }

    pub fn depth(&self) -> usize {
        self.choices.len()
    }

    /// Extends this prefix by one option on the next layer.
    pub fn child(&self, option: usize) -> Prefix {
        let mut choices = self.choices.clone();
        choices.push(option);
        Prefix { choices }
    }
}

/// An ordered list of layers with a cost unit tag and quantization resolution.
///
/// Construction validates every invariant; the per-layer prefix/suffix cost
/// sums used by completions and bucket ranges are cached here.
#[derive(Debug, Clone)]
pub struct SearchSpace {
    name: String,
    cost_unit: String,
    mode: PhiMode,
    /// One scaled cost unit in original cost units.
    resolution: f64,
    layers: Vec<LayerSpec>,
    // cum_*[d] = sum over layers < d; suffix_*[d] = sum over layers >= d.
    cum_min: Vec<i64>,
    cum_max: Vec<i64>,
    suffix_min: Vec<i64>,
    suffix_max: Vec<i64>,
    suffix_default: Vec<i64>,
}

impl SearchSpace {
    pub fn new(
        name: impl Into<String>,
        cost_unit: impl Into<String>,
        mode: PhiMode,
        layers: Vec<LayerSpec>,
    ) -> Result<Self, SpaceError> {
        Self::with_resolution(name, cost_unit, mode, 1.0, layers)
    }

    pub fn with_resolution(
        name: impl Into<String>,
        cost_unit: impl Into<String>,
        mode: PhiMode,
        resolution: f64,
        layers: Vec<LayerSpec>,
    ) -> Result<Self, SpaceError> {
        if layers.is_empty() {
            return Err(SpaceError::EmptyLayer { layer: 0 });
        }
        for (i, layer) in layers.iter().enumerate() {
            validate_layer(i, layer)?;
        }
        let n = layers.len();
        let mut cum_min = vec![0i64; n + 1];
        let mut cum_max = vec![0i64; n + 1];
        for (i, layer) in layers.iter().enumerate() {
            cum_min[i + 1] = cum_min[i] + layer.min_cost().0;
            cum_max[i + 1] = cum_max[i] + layer.max_cost().0;
        }
        let mut suffix_min = vec![0i64; n + 1];
        let mut suffix_max = vec![0i64; n + 1];
        let mut suffix_default = vec![0i64; n + 1];
        for (i, layer) in layers.iter().enumerate().rev() {
            suffix_min[i] = suffix_min[i + 1] + layer.min_cost().0;
            suffix_max[i] = suffix_max[i + 1] + layer.max_cost().0;
            suffix_default[i] = suffix_default[i + 1] + layer.default_cost().0;
        }
        Ok(SearchSpace {
            name: name.into(),
            cost_unit: cost_unit.into(),
            mode,
            resolution,
            layers,
            cum_min,
            cum_max,
            suffix_min,
            suffix_max,
            suffix_default,
        })
    }

    /// Test/demo helper: one layer per cost slice, labels `o<i>`, default 0.
    pub fn from_costs(
        name: impl Into<String>,
        layer_costs: &[Vec<i64>],
        default_index: usize,
    ) -> Result<Self, SpaceError> {
        let layers = layer_costs
            .iter()
            .map(|costs| LayerSpec::from_costs(costs, default_index))
            .collect();
        SearchSpace::new(name, "units", PhiMode::CostBucket, layers)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn cost_unit(&self) -> &str {
        &self.cost_unit
    }

    pub fn mode(&self) -> PhiMode {
        self.mode
    }

    /// Original cost units per scaled integer unit.
    pub fn resolution(&self) -> f64 {
        self.resolution
    }

    pub fn layers(&self) -> &[LayerSpec] {
        &self.layers
    }

    pub fn layer(&self, index: usize) -> &LayerSpec {
        &self.layers[index]
    }

    pub fn num_layers(&self) -> usize {
        self.layers.len()
    }

    /// Converts a scaled cost back to original units.
    pub fn cost_in_units(&self, cost: Cost) -> f64 {
        cost.0 as f64 * self.resolution
    }

    /// Converts original units to the nearest scaled cost.
    pub fn units_to_cost(&self, units: f64) -> Cost {
        Cost((units / self.resolution).round() as i64)
    }

    /// Sum of option counts over all layers.
    pub fn option_sum(&self) -> u64 {
        self.layers.iter().map(|l| l.len() as u64).sum()
    }

    /// Number of distinct architectures, as f64 (spaces can exceed u128).
    pub fn unique_models(&self) -> f64 {
        self.layers.iter().map(|l| l.len() as f64).product()
    }

    /// The all-maximal-cost architecture (option 0 on every layer).
    pub fn max_cost_architecture(&self) -> Architecture {
        Architecture::new(vec![0; self.num_layers()])
    }

    pub fn validate_architecture(&self, arch: &Architecture) -> Result<(), SpaceError> {
        if arch.len() != self.num_layers() {
            return Err(SpaceError::LengthMismatch {
                got: arch.len(),
                expected: self.num_layers(),
            });
        }
        self.check_indices(&arch.choices)
    }

    pub fn validate_prefix(&self, prefix: &Prefix) -> Result<(), SpaceError> {
        if prefix.depth() > self.num_layers() {
            return Err(SpaceError::DepthOutOfRange {
                depth: prefix.depth(),
                layers: self.num_layers(),
            });
        }
        self.check_indices(&prefix.choices)
    }

    fn check_indices(&self, choices: &[usize]) -> Result<(), SpaceError> {
        for (layer, &index) in choices.iter().enumerate() {
            let len = self.layers[layer].len();
            if index >= len {
                return Err(SpaceError::IndexOutOfRange { layer, index, len });
            }
        }
        Ok(())
    }

    /// Fills layers after the prefix with their default options.
    pub fn complete_with_defaults(&self, prefix: &Prefix) -> Result<Architecture, SpaceError> {
        self.validate_prefix(prefix)?;
        let mut choices = prefix.choices.clone();
        choices.extend(
            self.layers[prefix.depth()..]
                .iter()
                .map(|l| l.default_index),
        );
        Ok(Architecture::new(choices))
    }

    /// Total cost: sum of the chosen option's cost on every layer.
    pub fn architecture_cost(&self, arch: &Architecture) -> Result<Cost, SpaceError> {
        self.validate_architecture(arch)?;
        Ok(self.choices_cost(&arch.choices))
    }

    fn choices_cost(&self, choices: &[usize]) -> Cost {
        choices
            .iter()
            .enumerate()
            .map(|(i, &c)| self.layers[i].options[c].cost)
            .sum()
    }

    /// `(min, max)` total cost over all completions of the prefix: the fixed
    /// part plus the cheapest/most expensive option of every open layer.
    pub fn cost_completion_interval(&self, prefix: &Prefix) -> Result<(Cost, Cost), SpaceError> {
        self.validate_prefix(prefix)?;
        let fixed = self.choices_cost(&prefix.choices).0;
        let d = prefix.depth();
        Ok((
            Cost(fixed + self.suffix_min[d]),
            Cost(fixed + self.suffix_max[d]),
        ))
    }

    /// Cost range reachable by depth-`depth` candidates: layers before
    /// `depth` range over their options, layers at and after it sit on their
    /// defaults. This is the range the bucketization of layer `depth` maps.
    pub fn reachable_cost_range(&self, depth: usize) -> Result<(Cost, Cost), SpaceError> {
        if depth == 0 || depth > self.num_layers() {
            return Err(SpaceError::DepthOutOfRange {
                depth,
                layers: self.num_layers(),
            });
        }
        Ok((
            Cost(self.cum_min[depth] + self.suffix_default[depth]),
            Cost(self.cum_max[depth] + self.suffix_default[depth]),
        ))
    }

    /// Bucket index of `cost` within the reachable range of depth-`depth`
    /// candidates, over `bucket_count` buckets.
    pub fn bucket_of(
        &self,
        depth: usize,
        cost: Cost,
        bucket_count: usize,
    ) -> Result<usize, SpaceError> {
        let (min, max) = self.reachable_cost_range(depth)?;
        bucket_index(min, max, cost, bucket_count)
    }

    /// Parses a space-definition JSON file.
    pub fn load(path: impl AsRef<Path>) -> Result<Self, SpaceError> {
        let text = std::fs::read_to_string(path)?;
        Self::from_json_str(&text)
    }

    /// Parses a space definition from JSON text, quantizing raw costs to
    /// scaled integers and checking any declared header expectations.
    pub fn from_json_str(text: &str) -> Result<Self, SpaceError> {
        let file: SpaceFile =
            serde_json::from_str(text).map_err(|e| SpaceError::Parse(e.to_string()))?;
        file.into_space()
    }
}

fn validate_layer(index: usize, layer: &LayerSpec) -> Result<(), SpaceError> {
    if layer.options.is_empty() {
        return Err(SpaceError::EmptyLayer { layer: index });
    }
    if layer.default_index >= layer.options.len() {
        return Err(SpaceError::BadDefaultIndex {
            layer: index,
            default: layer.default_index,
            len: layer.options.len(),
        });
    }
    let mut labels = BTreeSet::new();
    for (i, opt) in layer.options.iter().enumerate() {
        if opt.cost.0 < 0 {
            return Err(SpaceError::NegativeCost {
                layer: index,
                index: i,
            });
        }
        if i > 0 && opt.cost > layer.options[i - 1].cost {
            return Err(SpaceError::UnsortedCosts {
                layer: index,
                index: i,
            });
        }
        if !labels.insert(opt.label.as_str()) {
            return Err(SpaceError::DuplicateLabel {
                layer: index,
                label: opt.label.clone(),
            });
        }
    }
    Ok(())
}

/// Checks every [`SearchSpace`] invariant (constructors already do).
pub fn validate_space(space: &SearchSpace) -> Result<(), SpaceError> {
    if space.layers().is_empty() {
        return Err(SpaceError::EmptyLayer { layer: 0 });
    }
    for (i, layer) in space.layers().iter().enumerate() {
        validate_layer(i, layer)?;
    }
    Ok(())
}

/// Maps `cost` in `[min, max]` onto `floor((cost - min) / (max - min) * H)`,
/// clamped to `[0, H - 1]` so exactly `H` buckets exist. A degenerate range
/// (`max == min`) maps to bucket 0. Costs outside the range by more than a
/// 1e-9 relative tolerance are rejected; within tolerance they snap to the
/// nearest bound.
pub fn bucket_index(
    min: Cost,
    max: Cost,
    cost: Cost,
    bucket_count: usize,
) -> Result<usize, SpaceError> {
    if bucket_count == 0 {
        return Err(SpaceError::ZeroBuckets);
    }
    let magnitude = min.0.abs().max(max.0.abs()).max(1) as f64;
    let tolerance = (1e-9 * magnitude) as i64;
    if cost.0 < min.0 - tolerance || cost.0 > max.0 + tolerance {
        return Err(SpaceError::CostOutOfRange { cost, min, max });
    }
    let c = cost.0.clamp(min.0, max.0);
    if max == min {
        return Ok(0);
    }
    let raw = ((c - min.0) as i128 * bucket_count as i128) / ((max.0 - min.0) as i128);
    Ok((raw as usize).min(bucket_count - 1))
}

/// Formats a count to two significant figures, e.g. `4.97e20 -> "5.0e20"`.
pub fn two_sig_figs(x: f64) -> String {
    format!("{x:.1e}")
}

// --- space-definition file (JSON) ---

#[derive(Debug, Serialize, Deserialize)]
struct SpaceFile {
    name: String,
    cost_unit: String,
    #[serde(default)]
    mode: Option<PhiMode>,
    #[serde(default)]
    cost_resolution: Option<f64>,
    #[serde(default)]
    expected_unique_models: Option<f64>,
    #[serde(default)]
    expected_option_sum: Option<u64>,
    #[serde(default)]
    expected_max_cost: Option<f64>,
    layers: Vec<LayerFile>,
}

#[derive(Debug, Serialize, Deserialize)]
struct LayerFile {
    #[serde(default)]
    default: usize,
    options: Vec<OptionFile>,
}

#[derive(Debug, Serialize, Deserialize)]
struct OptionFile {
    label: String,
    cost: f64,
    #[serde(default)]
    payload: BTreeMap<String, serde_json::Value>,
}

impl SpaceFile {
    fn into_space(self) -> Result<SearchSpace, SpaceError> {
        let mut max_raw: f64 = 0.0;
        for (li, layer) in self.layers.iter().enumerate() {
            for (oi, opt) in layer.options.iter().enumerate() {
                if !opt.cost.is_finite() {
                    return Err(SpaceError::Parse(format!(
                        "layer {li} option {oi}: non-finite cost"
                    )));
                }
                if opt.cost < 0.0 {
                    return Err(SpaceError::NegativeCost {
                        layer: li,
                        index: oi,
                    });
                }
                max_raw = max_raw.max(opt.cost);
            }
        }
        let resolution = match self.cost_resolution {
            Some(r) if r > 0.0 && r.is_finite() => r,
            Some(_) => {
                return Err(SpaceError::Parse(
                    "cost_resolution must be positive and finite".into(),
                ))
            }
            // One part in 1e6 of the largest single-option cost.
            None if max_raw > 0.0 => max_raw * 1e-6,
            None => 1.0,
        };
        if max_raw / resolution > 4.0e15 {
            return Err(SpaceError::Parse(
                "cost_resolution too fine: scaled costs would overflow".into(),
            ));
        }
        let layers: Vec<LayerSpec> = self
            .layers
            .into_iter()
            .map(|layer| LayerSpec {
                default_index: layer.default,
                options: layer
                    .options
                    .into_iter()
                    .map(|o| OptionSpec {
                        label: o.label,
                        cost: Cost((o.cost / resolution).round() as i64),
                        payload: o.payload,
                    })
                    .collect(),
            })
            .collect();
        let space = SearchSpace::with_resolution(
            self.name,
            self.cost_unit,
            self.mode.unwrap_or_default(),
            resolution,
            layers,
        )?;
        if let Some(expected) = self.expected_option_sum {
            let computed = space.option_sum();
            if computed != expected {
                return Err(SpaceError::HeaderMismatch {
                    field: "expected_option_sum",
                    declared: expected.to_string(),
                    computed: computed.to_string(),
                });
            }
        }
        if let Some(expected) = self.expected_unique_models {
            let computed = space.unique_models();
            if two_sig_figs(computed) != two_sig_figs(expected) {
                return Err(SpaceError::HeaderMismatch {
                    field: "expected_unique_models",
                    declared: two_sig_figs(expected),
                    computed: two_sig_figs(computed),
                });
            }
        }
        if let Some(expected) = self.expected_max_cost {
            let arch = space.max_cost_architecture();
            let computed = space.cost_in_units(space.architecture_cost(&arch)?);
            let tolerance = resolution * space.num_layers() as f64 + 1e-9 * expected.abs();
            if (computed - expected).abs() > tolerance {
                return Err(SpaceError::HeaderMismatch {
                    field: "expected_max_cost",
                    declared: expected.to_string(),
                    computed: computed.to_string(),
                });
            }
        }
        Ok(space)
    }
}
