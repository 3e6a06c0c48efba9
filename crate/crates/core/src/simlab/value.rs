use crate::datamodel::{Action, ObsDataset, UtilityModel};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct FoldValue {
    pub held_out: usize,
    /// Held-out records whose observed action matches the recommendation.
    pub agreeing: usize,
    /// Mean estimated utility of the agreeing records; `None` when there
    /// are none, in which case the fold is left out of the average.
    pub value: Option<f64>,
    /// Mean estimated utility of all held-out records.
    pub standard_of_care: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ObservationalValue {
    pub value: f64,
    pub standard_of_care: f64,
    pub percent_improvement: f64,
    pub folds: Vec<FoldValue>,
}

impl ObservationalValue {
    pub fn skipped_folds(&self) -> usize {
        self.folds.iter().filter(|f| f.value.is_none()).count()
    }
}

/// Cross-fitted value from observational data.
///
/// Record `i` belongs to fold `i mod folds`. For each fold, `learner` is
/// trained on the other folds and returns a policy and a utility; the fold's
/// value is the mean utility among held-out records whose observed action
/// equals the policy's recommendation.
pub fn value_observational<L, P>(data: &ObsDataset, folds: usize, learner: L) -> Result<ObservationalValue>
where
    L: Fn(&ObsDataset) -> Result<(P, UtilityModel)>,
    P: Fn(&[f64]) -> Action,
{
    if folds < 2 || folds > data.n() {
        return Err(Error::InvalidInput(format!(
            "fold count must lie in [2, {}], got {folds}",
            data.n()
        )));
    }
    let mut results = Vec::with_capacity(folds);
    for f in 0..folds {
        let (train, test): (Vec<usize>, Vec<usize>) = (0..data.n()).partition(|i| i % folds != f);
        let (policy, utility) = learner(&data.subset(&train)?)?;
        let mut total = 0.0;
        let mut agree_total = 0.0;
        let mut agreeing = 0;
        for &i in &test {
            let x = data.covariate_row(i);
            let u = utility.value(x, data.outcome_row(i))?;
            total += u;
            if policy(x) == data.actions()[i] {
                agree_total += u;
                agreeing += 1;
            }
        }
        results.push(FoldValue {
            held_out: test.len(),
            agreeing,
            value: (agreeing > 0).then(|| agree_total / agreeing as f64),
            standard_of_care: total / test.len() as f64,
        });
    }
    let used: Vec<f64> = results.iter().filter_map(|f| f.value).collect();
    if used.is_empty() {
        return Err(Error::InvalidInput("no fold has a record agreeing with the policy".into()));
    }
    let value = used.iter().sum::<f64>() / used.len() as f64;
    let standard_of_care = results.iter().map(|f| f.standard_of_care).sum::<f64>() / folds as f64;
    Ok(ObservationalValue {
        value,
        standard_of_care,
        percent_improvement: 100.0 * (value - standard_of_care) / standard_of_care.abs(),
        folds: results,
    })
}
