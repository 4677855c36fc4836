//! Stimulus sequences for the two-ratio speller.
//!
//! A trial is built from several sequences, each with a fixed number of
//! highlights per selectable symbol: with 32 selectable symbols and 12
//! highlights per stimulus, a sequence of 8 stimuli in which every symbol
//! appears 3 times contains 3 targets out of 8, and one of 18 stimuli with
//! 2 appearances per symbol contains 2 targets out of 18, whatever symbol
//! the user attends. Visual blanks pad stimuli up to the fixed highlight
//! count and never count as targets.
//!
//! Sequences are presented as blocks in random order; each block is
//! generated knowing the stimulus that precedes it so that no selectable
//! symbol is highlighted twice in a row anywhere in the trial.

use std::collections::BTreeSet;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{LlpError, Result};
use crate::types::Label;

/// Restarts allowed for one sequence before giving up.
pub const MAX_SEQUENCE_RESTARTS: usize = 10_000;
/// Regenerations allowed for one trial when decodability fails.
pub const MAX_TRIAL_ATTEMPTS: usize = 100;
/// Number of valid candidate placements scored per symbol.
const PLACEMENT_CANDIDATES: usize = 6;

pub const BLANK: &str = "#";

/// Rectangular symbol matrix; `#` cells are visual blanks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SymbolGrid {
    pub rows: usize,
    pub cols: usize,
    pub symbols: Vec<String>,
}

impl Default for SymbolGrid {
    fn default() -> Self {
        Self::speller()
    }
}

impl SymbolGrid {
    /// The 6 × 7 speller matrix: 26 letters, `_ . , ! ? <` and 10 blanks.
    pub fn speller() -> Self {
        let layout =
            ["A B C D E F #", "G H # I J K L", "M N O P # Q R", "# S T U V W #", "X Y # Z _ . #", ", # ! ? # < #"];
        let symbols = layout.iter().flat_map(|r| r.split(' ')).map(str::to_string).collect();
        Self { rows: 6, cols: 7, symbols }
    }

    pub fn new(rows: usize, cols: usize, symbols: Vec<String>) -> Result<Self> {
        if rows * cols != symbols.len() {
            return Err(LlpError::InvalidArgument(format!(
                "{rows}×{cols} grid needs {} symbols, got {}",
                rows * cols,
                symbols.len()
            )));
        }
        let g = Self { rows, cols, symbols };
        let mut seen = BTreeSet::new();
        for id in g.selectable() {
            if !seen.insert(&g.symbols[id]) {
                return Err(LlpError::InvalidArgument(format!("duplicate symbol `{}`", g.symbols[id])));
            }
        }
        Ok(g)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let g: Self = serde_json::from_str(s).map_err(|e| LlpError::InvalidArgument(e.to_string()))?;
        Self::new(g.rows, g.cols, g.symbols)
    }

    pub fn len(&self) -> usize {
        self.symbols.len()
    }

    pub fn is_empty(&self) -> bool {
        self.symbols.is_empty()
    }

    pub fn is_blank(&self, id: usize) -> bool {
        self.symbols[id] == BLANK
    }

    pub fn selectable(&self) -> Vec<usize> {
        (0..self.len()).filter(|&i| !self.is_blank(i)).collect()
    }

    pub fn blanks(&self) -> Vec<usize> {
        (0..self.len()).filter(|&i| self.is_blank(i)).collect()
    }

    /// 4-neighbourhood of a cell.
    pub fn neighbors(&self, id: usize) -> impl Iterator<Item = usize> + '_ {
        let (r, c) = (id / self.cols, id % self.cols);
        let mut out = Vec::with_capacity(4);
        if r > 0 {
            out.push(id - self.cols);
        }
        if r + 1 < self.rows {
            out.push(id + self.cols);
        }
        if c > 0 {
            out.push(id - 1);
        }
        if c + 1 < self.cols {
            out.push(id + 1);
        }
        out.into_iter()
    }

    /// Cell id of a typed character; a space maps to `_`.
    pub fn symbol_id(&self, ch: char) -> Option<usize> {
        let key = match ch {
            ' ' => "_".to_string(),
            c => c.to_uppercase().to_string(),
        };
        self.symbols.iter().position(|s| *s == key).filter(|&i| !self.is_blank(i))
    }

    /// Maps a sentence to cell ids, failing on characters the grid cannot spell.
    pub fn encode(&self, sentence: &str) -> Result<Vec<usize>> {
        sentence
            .chars()
            .map(|c| {
                self.symbol_id(c).ok_or_else(|| LlpError::InvalidArgument(format!("`{c}` is not a selectable symbol")))
            })
            .collect()
    }
}

/// One highlighting event: a sorted set of cell ids.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Stimulus(pub Vec<usize>);

impl Stimulus {
    pub fn new(mut ids: Vec<usize>) -> Self {
        ids.sort_unstable();
        Self(ids)
    }

    pub fn contains(&self, id: usize) -> bool {
        self.0.binary_search(&id).is_ok()
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// Sequence length and per-symbol highlight count.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SequenceSpec {
    pub length: usize,
    pub appearances: usize,
}

impl SequenceSpec {
    /// 8 stimuli, every selectable symbol highlighted 3 times.
    pub const HIGH_RATIO: Self = Self { length: 8, appearances: 3 };
    /// 18 stimuli, every selectable symbol highlighted 2 times.
    pub const LOW_RATIO: Self = Self { length: 18, appearances: 2 };

    /// Target proportion seen by any attended symbol.
    pub fn target_ratio(&self) -> f64 {
        self.appearances as f64 / self.length as f64
    }
}

/// Sequences that make up a trial, each tagged with its zero-based group.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrialDesign {
    pub sequences: Vec<(SequenceSpec, usize)>,
    pub highlight_size: usize,
}

impl Default for TrialDesign {
    fn default() -> Self {
        Self::speller()
    }
}

impl TrialDesign {
    /// Four high-ratio sequences (group 0) and two low-ratio ones (group 1): 68 stimuli.
    pub fn speller() -> Self {
        let mut sequences = vec![(SequenceSpec::HIGH_RATIO, 0); 4];
        sequences.extend([(SequenceSpec::LOW_RATIO, 1); 2]);
        Self { sequences, highlight_size: 12 }
    }

    pub fn stimuli(&self) -> usize {
        self.sequences.iter().map(|(s, _)| s.length).sum()
    }

    pub fn groups(&self) -> usize {
        self.sequences.iter().map(|(_, g)| g + 1).max().unwrap_or(0)
    }

    /// Stimuli per group.
    pub fn group_sizes(&self) -> Vec<usize> {
        let mut out = vec![0; self.groups()];
        for (s, g) in &self.sequences {
            out[*g] += s.length;
        }
        out
    }

    /// Expected target and non-target counts per group for any attended symbol.
    pub fn group_targets(&self) -> Vec<(usize, usize)> {
        let mut out = vec![(0, 0); self.groups()];
        for (s, g) in &self.sequences {
            out[*g].0 += s.appearances;
            out[*g].1 += s.length - s.appearances;
        }
        out
    }

    /// Mixing matrix implied by the design.
    pub fn mixing(&self) -> crate::mixing::MixingMatrix {
        let rows = self
            .group_targets()
            .iter()
            .map(|&(t, n)| {
                let total = (t + n) as f64;
                [t as f64 / total, n as f64 / total]
            })
            .collect();
        crate::mixing::MixingMatrix::new(rows)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrialStimulus {
    pub stimulus: Stimulus,
    /// Zero-based group.
    pub group: usize,
    /// Index of the sequence within the trial design.
    pub sequence: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trial {
    pub stimuli: Vec<TrialStimulus>,
}

#[derive(Serialize, Deserialize)]
struct TrialJson {
    stimuli: Vec<StimulusJson>,
}

#[derive(Serialize, Deserialize)]
struct StimulusJson {
    group: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    sequence: Option<usize>,
    highlighted: Vec<usize>,
}

impl Trial {
    pub fn len(&self) -> usize {
        self.stimuli.len()
    }

    pub fn is_empty(&self) -> bool {
        self.stimuli.is_empty()
    }

    pub fn groups(&self) -> Vec<usize> {
        self.stimuli.iter().map(|s| s.group).collect()
    }

    fn to_dto(&self) -> TrialJson {
        TrialJson {
            stimuli: self
                .stimuli
                .iter()
                .map(|s| StimulusJson {
                    group: s.group + 1,
                    sequence: Some(s.sequence),
                    highlighted: s.stimulus.0.clone(),
                })
                .collect(),
        }
    }

    fn from_dto(dto: TrialJson) -> Result<Self> {
        let stimuli = dto
            .stimuli
            .into_iter()
            .map(|s| {
                if s.group == 0 {
                    return Err(LlpError::InvalidArgument("groups are numbered from 1".into()));
                }
                Ok(TrialStimulus {
                    stimulus: Stimulus::new(s.highlighted),
                    group: s.group - 1,
                    sequence: s.sequence.unwrap_or(usize::MAX),
                })
            })
            .collect::<Result<_>>()?;
        Ok(Self { stimuli })
    }

    /// `{"stimuli": [{"group": 1, "sequence": 0, "highlighted": [...]}, ...]}`
    pub fn to_json(&self) -> String {
        serde_json::to_string(&self.to_dto()).expect("trial serializes")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let dto: TrialJson = serde_json::from_str(s).map_err(|e| LlpError::InvalidArgument(e.to_string()))?;
        Self::from_dto(dto)
    }

    /// Serializes a list of trials as a JSON array.
    pub fn list_to_json(trials: &[Trial]) -> String {
        let dtos: Vec<TrialJson> = trials.iter().map(Trial::to_dto).collect();
        serde_json::to_string(&dtos).expect("trials serialize")
    }

    pub fn list_from_json(s: &str) -> Result<Vec<Trial>> {
        let dtos: Vec<TrialJson> = serde_json::from_str(s).map_err(|e| LlpError::InvalidArgument(e.to_string()))?;
        dtos.into_iter().map(Self::from_dto).collect()
    }
}

fn check_feasible(grid: &SymbolGrid, spec: &SequenceSpec, size: usize) -> Result<()> {
    let n_sel = grid.selectable().len();
    let n_blank = grid.blanks().len();
    let total = spec.appearances * n_sel;
    let fail = |why: String| Err(LlpError::GenerationFailed(format!("infeasible sequence {spec:?}: {why}")));
    if spec.length == 0 || spec.appearances == 0 {
        return fail("length and appearances must be positive".into());
    }
    if spec.appearances > spec.length.div_ceil(2) {
        return fail(format!("{} non-consecutive appearances do not fit in {} stimuli", spec.appearances, spec.length));
    }
    if total > spec.length * size {
        return fail(format!("{total} selectable highlights exceed {} slots", spec.length * size));
    }
    if total + spec.length * n_blank < spec.length * size {
        return fail(format!("not enough blanks to pad {} stimuli to {size}", spec.length));
    }
    if size > n_sel + n_blank {
        return fail(format!("highlight size {size} exceeds the grid"));
    }
    Ok(())
}

/// Generates one sequence. `previous` is the stimulus shown right before it,
/// whose selectable symbols must not open the sequence.
pub fn generate_sequence<R: Rng>(
    grid: &SymbolGrid,
    spec: &SequenceSpec,
    highlight_size: usize,
    previous: Option<&Stimulus>,
    rng: &mut R,
) -> Result<Vec<Stimulus>> {
    check_feasible(grid, spec, highlight_size)?;
    let selectable = grid.selectable();
    let blanks = grid.blanks();
    let n = spec.length;
    let total = spec.appearances * selectable.len();
    // Selectable highlights per stimulus: as even as possible, at least
    // `size - blanks` so the padding fits.
    let min_sel = highlight_size.saturating_sub(blanks.len());

    for _ in 0..MAX_SEQUENCE_RESTARTS {
        let mut caps = vec![total / n; n];
        let mut extra: Vec<usize> = (0..n).collect();
        extra.shuffle(rng);
        for &i in extra.iter().take(total % n) {
            caps[i] += 1;
        }
        if caps.iter().any(|&c| c < min_sel || c > highlight_size) {
            return Err(LlpError::GenerationFailed("stimulus capacities out of range".into()));
        }
        if let Some(members) = place_symbols(grid, spec, &selectable, caps, previous, rng) {
            let stimuli = members
                .into_iter()
                .map(|mut ids| {
                    let pad = highlight_size - ids.len();
                    ids.extend(blanks.choose_multiple(rng, pad).copied());
                    Stimulus::new(ids)
                })
                .collect();
            return Ok(stimuli);
        }
    }
    Err(LlpError::GenerationFailed(format!("no valid placement for {spec:?} after {MAX_SEQUENCE_RESTARTS} restarts")))
}

/// Randomized greedy placement of every symbol's appearances; `None` on a dead end.
fn place_symbols<R: Rng>(
    grid: &SymbolGrid,
    spec: &SequenceSpec,
    selectable: &[usize],
    mut caps: Vec<usize>,
    previous: Option<&Stimulus>,
    rng: &mut R,
) -> Option<Vec<Vec<usize>>> {
    let n = spec.length;
    let mut members: Vec<Vec<usize>> = vec![Vec::new(); n];
    let mut order = selectable.to_vec();
    order.shuffle(rng);
    // Symbols barred from the first stimulus go first: they have fewer options.
    if let Some(prev) = previous {
        order.sort_by_key(|&s| !prev.contains(s));
    }
    let mut in_stimulus = vec![vec![false; grid.len()]; n];

    for (placed, &sym) in order.iter().enumerate() {
        let remaining_after = order.len() - placed - 1;
        let barred_first = previous.is_some_and(|p| p.contains(sym));
        let mut best: Option<(usize, Vec<usize>)> = None;
        let mut found = 0;
        for _ in 0..64 {
            let Some(pick) = sample_positions(&caps, spec.appearances, barred_first, rng) else {
                continue;
            };
            if !still_feasible(&caps, &pick, remaining_after) {
                continue;
            }
            let score: usize = pick.iter().map(|&i| grid.neighbors(sym).filter(|&nb| in_stimulus[i][nb]).count()).sum();
            if best.as_ref().is_none_or(|(s, _)| score < *s) {
                best = Some((score, pick));
            }
            found += 1;
            if found >= PLACEMENT_CANDIDATES || best.as_ref().is_some_and(|(s, _)| *s == 0) {
                break;
            }
        }
        let (_, pick) = best?;
        for i in pick {
            caps[i] -= 1;
            members[i].push(sym);
            in_stimulus[i][sym] = true;
        }
    }
    Some(members)
}

/// Draws `k` pairwise non-adjacent positions with probability proportional to
/// remaining capacity.
fn sample_positions<R: Rng>(caps: &[usize], k: usize, barred_first: bool, rng: &mut R) -> Option<Vec<usize>> {
    let mut allowed: Vec<bool> = caps.iter().map(|&c| c > 0).collect();
    if barred_first {
        allowed[0] = false;
    }
    let mut pick = Vec::with_capacity(k);
    for _ in 0..k {
        let total: usize = (0..caps.len()).filter(|&i| allowed[i]).map(|i| caps[i]).sum();
        if total == 0 {
            return None;
        }
        let mut x = rng.gen_range(0..total);
        let i = (0..caps.len()).filter(|&i| allowed[i]).find(|&i| {
            if x < caps[i] {
                true
            } else {
                x -= caps[i];
                false
            }
        })?;
        pick.push(i);
        allowed[i] = false;
        if i > 0 {
            allowed[i - 1] = false;
        }
        if i + 1 < caps.len() {
            allowed[i + 1] = false;
        }
    }
    pick.sort_unstable();
    Some(pick)
}

/// Necessary conditions for the remaining symbols to fill the remaining capacity:
/// no position (nor adjacent pair) can need more symbols than are left.
fn still_feasible(caps: &[usize], pick: &[usize], remaining: usize) -> bool {
    let after = |i: usize| caps[i] - usize::from(pick.contains(&i));
    (0..caps.len()).all(|i| after(i) <= remaining) && (1..caps.len()).all(|i| after(i - 1) + after(i) <= remaining)
}

/// Draws the sequences of a trial in random block order and checks decodability.
pub fn assemble_trial(grid: &SymbolGrid, design: &TrialDesign, seed: u64) -> Result<Trial> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..MAX_TRIAL_ATTEMPTS {
        let mut order: Vec<usize> = (0..design.sequences.len()).collect();
        order.shuffle(&mut rng);
        let mut stimuli: Vec<TrialStimulus> = Vec::with_capacity(design.stimuli());
        for &seq in &order {
            let (spec, group) = design.sequences[seq];
            let previous = stimuli.last().map(|s| &s.stimulus);
            let block = generate_sequence(grid, &spec, design.highlight_size, previous, &mut rng)?;
            stimuli.extend(block.into_iter().map(|stimulus| TrialStimulus { stimulus, group, sequence: seq }));
        }
        let trial = Trial { stimuli };
        if first_pattern_collision(grid, &trial).is_none() {
            return Ok(trial);
        }
        log::debug!("membership patterns collide; regenerating trial");
    }
    Err(LlpError::GenerationFailed(format!("no decodable trial after {MAX_TRIAL_ATTEMPTS} attempts")))
}

/// Two selectable symbols that are highlighted in exactly the same stimuli.
fn first_pattern_collision(grid: &SymbolGrid, trial: &Trial) -> Option<(usize, usize)> {
    let mut seen: std::collections::HashMap<Vec<bool>, usize> = std::collections::HashMap::new();
    for s in grid.selectable() {
        let pattern: Vec<bool> = trial.stimuli.iter().map(|t| t.stimulus.contains(s)).collect();
        if let Some(&other) = seen.get(&pattern) {
            return Some((other, s));
        }
        seen.insert(pattern, s);
    }
    None
}

/// Target / non-target role of every stimulus for an attended symbol.
pub fn label_stimuli(trial: &Trial, grid: &SymbolGrid, attended: usize) -> Result<Vec<Label>> {
    if attended >= grid.len() {
        return Err(LlpError::InvalidArgument(format!("symbol {attended} is not on the grid")));
    }
    if grid.is_blank(attended) {
        return Err(LlpError::InvalidArgument(format!("symbol {attended} is a visual blank")));
    }
    Ok(trial
        .stimuli
        .iter()
        .map(|s| if s.stimulus.contains(attended) { Label::Target } else { Label::NonTarget })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TrialViolation {
    StimulusCount { expected: usize, got: usize },
    GroupCount { group: usize, expected: usize, got: usize },
    StimulusSize { index: usize, size: usize },
    InvalidSymbol { index: usize, symbol: usize },
    DuplicateSymbol { index: usize, symbol: usize },
    UnknownSequence { index: usize },
    SequenceLength { sequence: usize, expected: usize, got: usize },
    Appearances { sequence: usize, symbol: usize, expected: usize, got: usize },
    DoubleFlash { index: usize, symbol: usize },
    NotDecodable { first: usize, second: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrialReport {
    pub violations: Vec<TrialViolation>,
}

impl TrialReport {
    pub fn is_ok(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Checks every structural constraint of a trial against its design.
pub fn validate_trial(trial: &Trial, grid: &SymbolGrid, design: &TrialDesign) -> TrialReport {
    use TrialViolation::*;
    let mut v = Vec::new();
    if trial.len() != design.stimuli() {
        v.push(StimulusCount { expected: design.stimuli(), got: trial.len() });
    }
    let mut group_counts = vec![0; design.groups()];
    for s in &trial.stimuli {
        if let Some(c) = group_counts.get_mut(s.group) {
            *c += 1;
        }
    }
    for (group, (&expected, &got)) in design.group_sizes().iter().zip(&group_counts).enumerate() {
        if expected != got {
            v.push(GroupCount { group, expected, got });
        }
    }

    for (index, s) in trial.stimuli.iter().enumerate() {
        if s.stimulus.len() != design.highlight_size {
            v.push(StimulusSize { index, size: s.stimulus.len() });
        }
        for w in s.stimulus.0.windows(2) {
            if w[0] == w[1] {
                v.push(DuplicateSymbol { index, symbol: w[0] });
            }
        }
        if let Some(&symbol) = s.stimulus.0.iter().find(|&&id| id >= grid.len()) {
            v.push(InvalidSymbol { index, symbol });
        }
        if s.sequence >= design.sequences.len() || design.sequences[s.sequence].1 != s.group {
            v.push(UnknownSequence { index });
        }
    }

    let selectable = grid.selectable();
    for (seq, (spec, _)) in design.sequences.iter().enumerate() {
        let members: Vec<&Stimulus> = trial.stimuli.iter().filter(|s| s.sequence == seq).map(|s| &s.stimulus).collect();
        if members.len() != spec.length {
            v.push(SequenceLength { sequence: seq, expected: spec.length, got: members.len() });
        }
        for &symbol in &selectable {
            let got = members.iter().filter(|m| m.contains(symbol)).count();
            if got != spec.appearances {
                v.push(Appearances { sequence: seq, symbol, expected: spec.appearances, got });
            }
        }
    }

    for (index, w) in trial.stimuli.windows(2).enumerate() {
        for &symbol in &w[1].stimulus.0 {
            if symbol < grid.len() && !grid.is_blank(symbol) && w[0].stimulus.contains(symbol) {
                v.push(DoubleFlash { index: index + 1, symbol });
            }
        }
    }
    if let Some((first, second)) = first_pattern_collision(grid, trial) {
        v.push(NotDecodable { first, second });
    }
    TrialReport { violations: v }
}

/// Checks a single generated sequence in isolation.
pub fn validate_sequence(grid: &SymbolGrid, spec: &SequenceSpec, highlight_size: usize, seq: &[Stimulus]) -> bool {
    seq.len() == spec.length
        && seq.iter().all(|s| s.len() == highlight_size && s.0.windows(2).all(|w| w[0] < w[1]))
        && grid.selectable().iter().all(|&sym| {
            let hits: Vec<usize> = (0..seq.len()).filter(|&i| seq[i].contains(sym)).collect();
            hits.len() == spec.appearances && hits.windows(2).all(|w| w[1] > w[0] + 1)
        })
}
