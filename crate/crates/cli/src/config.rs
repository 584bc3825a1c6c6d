//! Experiment configuration: one JSON file per run, tagged by experiment
//! kind, with all defaults centralized here and printable via the `defaults`
//! subcommand.

use serde::{Deserialize, Serialize};

use groupprune::seqattn::OptimizerKind;

/// Top-level config: the `experiment` tag picks the runner.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(tag = "experiment", rename_all = "snake_case")]
pub enum ExperimentConfig {
    Equivalence(EquivalenceConfig),
    UniqueMin(UniqueMinConfig),
    OmprRecovery(OmprRecoveryConfig),
    PruningCompare(PruningCompareConfig),
    ScheduleAblation(ScheduleAblationConfig),
}

impl ExperimentConfig {
    pub fn kind_name(&self) -> &'static str {
        match self {
            ExperimentConfig::Equivalence(_) => "equivalence",
            ExperimentConfig::UniqueMin(_) => "unique_min",
            ExperimentConfig::OmprRecovery(_) => "ompr_recovery",
            ExperimentConfig::PruningCompare(_) => "pruning_compare",
            ExperimentConfig::ScheduleAblation(_) => "schedule_ablation",
        }
    }

    pub fn seeds(&self) -> &[u64] {
        match self {
            ExperimentConfig::Equivalence(c) => &c.seeds,
            ExperimentConfig::UniqueMin(c) => &c.seeds,
            ExperimentConfig::OmprRecovery(c) => &c.seeds,
            ExperimentConfig::PruningCompare(c) => &c.seeds,
            ExperimentConfig::ScheduleAblation(c) => &c.seeds,
        }
    }

    pub fn output_dir(&self) -> Option<&str> {
        match self {
            ExperimentConfig::Equivalence(c) => c.output_dir.as_deref(),
            ExperimentConfig::UniqueMin(c) => c.output_dir.as_deref(),
            ExperimentConfig::OmprRecovery(c) => c.output_dir.as_deref(),
            ExperimentConfig::PruningCompare(c) => c.output_dir.as_deref(),
            ExperimentConfig::ScheduleAblation(c) => c.output_dir.as_deref(),
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        if self.seeds().is_empty() {
            return Err("need at least one seed".into());
        }
        match self {
            ExperimentConfig::Equivalence(c) => c.validate(),
            ExperimentConfig::UniqueMin(c) => c.validate(),
            ExperimentConfig::OmprRecovery(c) => c.validate(),
            ExperimentConfig::PruningCompare(c) => c.validate(),
            ExperimentConfig::ScheduleAblation(c) => c.validate(),
        }
    }
}

fn default_seeds() -> Vec<u64> {
    vec![0]
}

/// Mask-equivalence study: best-found masked optimum vs regularized optimum
/// on small random instances, oracle-verified on the regularized side.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct EquivalenceConfig {
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    #[serde(default = "eq_instances")]
    pub instances_per_seed: usize,
    #[serde(default = "eq_features")]
    pub num_features: usize,
    #[serde(default = "eq_responses")]
    pub num_responses: usize,
    #[serde(default = "eq_samples")]
    pub num_samples: usize,
    #[serde(default = "eq_groups")]
    pub num_groups: usize,
    #[serde(default = "eq_ridge")]
    pub mu_ridge: f64,
    #[serde(default = "eq_lambda")]
    pub lambda: f64,
    #[serde(default = "eq_restarts")]
    pub restarts: usize,
    #[serde(default)]
    pub output_dir: Option<String>,
}

fn eq_instances() -> usize {
    7
}
fn eq_features() -> usize {
    5
}
fn eq_responses() -> usize {
    2
}
fn eq_samples() -> usize {
    14
}
fn eq_groups() -> usize {
    3
}
fn eq_ridge() -> f64 {
    0.05
}
fn eq_lambda() -> f64 {
    0.4
}
fn eq_restarts() -> usize {
    8
}

impl Default for EquivalenceConfig {
    fn default() -> Self {
        serde_json::from_str("{}").expect("all fields have defaults")
    }
}

impl EquivalenceConfig {
    fn validate(&self) -> Result<(), String> {
        if self.num_features * self.num_responses > 12 {
            return Err("equivalence instances are limited to 12 coefficients".into());
        }
        if self.num_groups > 4 {
            return Err("equivalence instances are limited to 4 groups".into());
        }
        if self.mu_ridge < 1e-2 {
            return Err("equivalence instances need mu_ridge >= 1e-2".into());
        }
        if !(self.lambda > 0.0) {
            return Err("lambda must be positive".into());
        }
        Ok(())
    }
}

/// Unique-sparse-minimum study: constructed instances with the group LASSO
/// solution one-group-sparse; every q kind must return the same minimizer
/// and survive the global-minimum probe.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct UniqueMinConfig {
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    #[serde(default = "um_instances")]
    pub instances_per_seed: usize,
    #[serde(default = "um_features")]
    pub num_features: usize,
    #[serde(default = "um_groups")]
    pub num_groups: usize,
    #[serde(default = "um_ridge")]
    pub mu_ridge: f64,
    #[serde(default)]
    pub output_dir: Option<String>,
}

fn um_instances() -> usize {
    10
}
fn um_features() -> usize {
    8
}
fn um_groups() -> usize {
    4
}
fn um_ridge() -> f64 {
    1e-2
}

impl Default for UniqueMinConfig {
    fn default() -> Self {
        serde_json::from_str("{}").expect("all fields have defaults")
    }
}

impl UniqueMinConfig {
    fn validate(&self) -> Result<(), String> {
        if self.num_features > 16 {
            return Err("unique-min instances are limited to 16 coefficients".into());
        }
        if self.mu_ridge < 0.0 {
            return Err("mu_ridge must be nonnegative".into());
        }
        Ok(())
    }
}

/// Support-recovery study for the replacement loop on planted instances.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct OmprRecoveryConfig {
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    #[serde(default = "or_features")]
    pub num_features: usize,
    #[serde(default = "or_groups")]
    pub num_groups: usize,
    #[serde(default = "or_klist")]
    pub planted_counts: Vec<usize>,
    #[serde(default)]
    pub noise: f64,
    #[serde(default)]
    pub check_selection_equivalence: bool,
    #[serde(default)]
    pub random_init: bool,
    #[serde(default)]
    pub output_dir: Option<String>,
}

fn or_features() -> usize {
    12
}
fn or_groups() -> usize {
    6
}
fn or_klist() -> Vec<usize> {
    vec![1, 2, 3]
}

impl Default for OmprRecoveryConfig {
    fn default() -> Self {
        serde_json::from_str("{}").expect("all fields have defaults")
    }
}

impl OmprRecoveryConfig {
    fn validate(&self) -> Result<(), String> {
        if self.planted_counts.is_empty() {
            return Err("need at least one planted count".into());
        }
        if self
            .planted_counts
            .iter()
            .any(|&k| k == 0 || k > self.num_groups)
        {
            return Err("planted counts must lie in [1, num_groups]".into());
        }
        Ok(())
    }
}

/// Which pruning variant a comparison row runs: the named algorithm, or the
/// attention-guided algorithm with its sparsification ramps removed
/// (abrupt dense/sparse cycles).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AlgoChoice {
    #[serde(rename = "seqattnpp")]
    SeqAttnPP,
    #[serde(rename = "seqattnpp_no_sparsification")]
    SeqAttnPPNoSparsification,
    Acdc,
    Magnitude,
    #[serde(rename = "powerprop")]
    PowerProp,
}

impl AlgoChoice {
    pub fn label(&self) -> &'static str {
        match self {
            AlgoChoice::SeqAttnPP => "seqattnpp",
            AlgoChoice::SeqAttnPPNoSparsification => "seqattnpp_no_sparsification",
            AlgoChoice::Acdc => "acdc",
            AlgoChoice::Magnitude => "magnitude",
            AlgoChoice::PowerProp => "powerprop",
        }
    }
}

/// Desk-scale block-pruning comparison on the planted-teacher task.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct PruningCompareConfig {
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    #[serde(default = "pc_features")]
    pub num_features: usize,
    #[serde(default = "pc_hidden")]
    pub hidden_width: usize,
    #[serde(default = "pc_classes")]
    pub num_classes: usize,
    #[serde(default = "pc_blocks")]
    pub block_sizes: Vec<usize>,
    #[serde(default = "pc_sparsities")]
    pub sparsities: Vec<f64>,
    #[serde(default = "pc_algos")]
    pub algos: Vec<AlgoChoice>,
    #[serde(default = "pc_train")]
    pub num_train: usize,
    #[serde(default = "pc_eval")]
    pub num_eval: usize,
    #[serde(default = "pc_steps")]
    pub steps: usize,
    #[serde(default = "pc_cycles")]
    pub cycles: usize,
    #[serde(default = "pc_exponent")]
    pub sparsify_exponent: f64,
    /// How the student's readout head is handled: pinned at the teacher's
    /// head (hidden units keep fixed roles, so planted-block recovery is well
    /// defined), warm-started but trainable, or freely initialized.
    #[serde(default = "pc_head")]
    pub head: HeadMode,
    /// Minimum standardized top-two logit gap when sampling labels; widens
    /// decision boundaries so the task is learnable at desk scale.
    #[serde(default = "pc_margin")]
    pub label_margin: f64,
    /// Nonzero teacher blocks; defaults to the retained count at the first
    /// sparsity/block combination.
    #[serde(default)]
    pub planted_blocks: Option<usize>,
    /// Learning-rate scale for the powerpropagation baseline, whose
    /// norm-scaled parameterization amplifies gradient magnitudes.
    #[serde(default = "pc_pp_lr")]
    pub powerprop_lr_scale: f64,
    #[serde(default = "pc_traincfg")]
    pub train: TrainSettings,
    #[serde(default)]
    pub output_dir: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HeadMode {
    FrozenTeacher,
    WarmTeacher,
    Free,
}

fn pc_head() -> HeadMode {
    HeadMode::FrozenTeacher
}

fn pc_pp_lr() -> f64 {
    0.05
}

fn pc_margin() -> f64 {
    0.3
}

fn pc_features() -> usize {
    64
}
fn pc_hidden() -> usize {
    128
}
fn pc_classes() -> usize {
    8
}
fn pc_blocks() -> Vec<usize> {
    vec![8]
}
fn pc_sparsities() -> Vec<f64> {
    vec![0.9]
}
fn pc_algos() -> Vec<AlgoChoice> {
    vec![
        AlgoChoice::SeqAttnPP,
        AlgoChoice::Acdc,
        AlgoChoice::Magnitude,
        AlgoChoice::PowerProp,
    ]
}
fn pc_train() -> usize {
    16384
}
fn pc_eval() -> usize {
    512
}
fn pc_steps() -> usize {
    3200
}
fn pc_cycles() -> usize {
    3
}
fn pc_exponent() -> f64 {
    4.0
}

/// Training knobs shared across comparison rows.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct TrainSettings {
    #[serde(default = "ts_batch")]
    pub batch_size: usize,
    #[serde(default = "ts_lr0")]
    pub lr0: f64,
    #[serde(default = "ts_lr1")]
    pub lr1: Option<f64>,
    #[serde(default = "ts_opt")]
    pub optimizer: OptimizerKind,
    #[serde(default = "ts_wd")]
    pub weight_decay: f64,
    #[serde(default = "ts_clip")]
    pub clip_density_bound: bool,
    #[serde(default = "ts_eval_every")]
    pub eval_every: usize,
    #[serde(default = "ts_min_groups")]
    pub min_groups_to_prune: usize,
}

fn ts_batch() -> usize {
    64
}
fn ts_lr0() -> f64 {
    0.5
}
fn ts_lr1() -> Option<f64> {
    Some(0.02)
}
fn ts_opt() -> OptimizerKind {
    OptimizerKind::Momentum { beta: 0.9 }
}
fn ts_wd() -> f64 {
    5e-4
}
fn ts_clip() -> bool {
    true
}
fn ts_eval_every() -> usize {
    25
}
fn ts_min_groups() -> usize {
    100
}

fn pc_traincfg() -> TrainSettings {
    serde_json::from_str("{}").expect("all fields have defaults")
}

impl Default for PruningCompareConfig {
    fn default() -> Self {
        serde_json::from_str("{}").expect("all fields have defaults")
    }
}

impl PruningCompareConfig {
    fn validate(&self) -> Result<(), String> {
        if self.block_sizes.is_empty() || self.sparsities.is_empty() || self.algos.is_empty() {
            return Err("block_sizes, sparsities and algos must be nonempty".into());
        }
        if self.sparsities.iter().any(|&s| !(s > 0.0 && s < 1.0)) {
            return Err("sparsities must lie in (0, 1)".into());
        }
        Ok(())
    }
}

/// Ramp-exponent ablation: final eval metric per exponent value.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct ScheduleAblationConfig {
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    #[serde(default = "sa_exponents")]
    pub exponents: Vec<f64>,
    #[serde(default = "sa_base")]
    pub base: PruningCompareConfig,
    #[serde(default)]
    pub output_dir: Option<String>,
}

fn sa_exponents() -> Vec<f64> {
    vec![2.0, 4.0, 8.0]
}
fn sa_base() -> PruningCompareConfig {
    PruningCompareConfig {
        algos: vec![AlgoChoice::SeqAttnPP],
        ..PruningCompareConfig::default()
    }
}

impl Default for ScheduleAblationConfig {
    fn default() -> Self {
        serde_json::from_str("{}").expect("all fields have defaults")
    }
}

impl ScheduleAblationConfig {
    fn validate(&self) -> Result<(), String> {
        if self.exponents.is_empty() || self.exponents.iter().any(|&c| !(c > 0.0)) {
            return Err("exponents must be positive".into());
        }
        self.base.validate()
    }
}

/// Synthetic dataset request for the `synth` subcommand.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SynthSpec {
    PlantedGroupSparseRegression {
        seed: u64,
        num_features: usize,
        num_groups: usize,
        planted: usize,
        #[serde(default)]
        noise: f64,
        #[serde(default)]
        output_dir: Option<String>,
    },
    PlantedBlockTeacherClassification {
        seed: u64,
        num_features: usize,
        hidden_width: usize,
        num_classes: usize,
        block_size: usize,
        planted_blocks: usize,
        num_train: usize,
        num_eval: usize,
        #[serde(default)]
        label_margin: f64,
        #[serde(default)]
        output_dir: Option<String>,
    },
}

/// Oracle-run request for the `oracle` subcommand.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct OracleConfig {
    pub seed: u64,
    #[serde(default = "or_features")]
    pub num_features: usize,
    #[serde(default = "or_groups")]
    pub num_groups: usize,
    #[serde(default = "oc_planted")]
    pub planted: usize,
    #[serde(default)]
    pub noise: f64,
    #[serde(default = "oc_ridge")]
    pub mu_ridge: f64,
    #[serde(default = "oc_sparsity")]
    pub max_support: usize,
    #[serde(default = "oc_samples")]
    pub rsc_samples: usize,
    #[serde(default)]
    pub output_dir: Option<String>,
}

fn oc_planted() -> usize {
    2
}
fn oc_ridge() -> f64 {
    0.01
}
fn oc_sparsity() -> usize {
    2
}
fn oc_samples() -> usize {
    100
}

impl Default for OracleConfig {
    fn default() -> Self {
        serde_json::from_str(r#"{"seed": 0}"#).expect("all fields have defaults")
    }
}

/// FNV-1a over the canonical JSON serialization: the determinism contract's
/// run identifier.
pub fn config_hash(config: &ExperimentConfig) -> String {
    let text = serde_json::to_string(config).expect("configs serialize");
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in text.as_bytes() {
        h ^= *b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01B3);
    }
    format!("{h:016x}")
}
