use super::{Measure, MeasureContext, MeasureResult, ScoreKind};
use crate::error::{Error, Result};
use crate::model::{build_preference, UserId};
use crate::transport::{TransportProblem, TransportSolution};

/// The transport problem and its solution between the two users' preferences.
pub fn pmd_solution(
    u: UserId,
    v: UserId,
    ctx: &MeasureContext<'_>,
) -> Result<(TransportProblem, TransportSolution)> {
    let metric = ctx.require_metric(Measure::Pmd)?;
    let mut pu = build_preference(ctx.ratings, u)?;
    let mut pv = build_preference(ctx.ratings, v)?;
    if let Some(top) = ctx.truncation {
        pu = pu.truncate(top);
        pv = pv.truncate(top);
    }
    let problem = TransportProblem::between(&pu, &pv, metric)?;
    let solution = ctx.solver.solve(&problem)?;
    Ok((problem, solution))
}

/// Earth mover's distance between the two users' preferences.
///
/// A user with no positive ratings has no preference, which makes the
/// distance uncomputable rather than an error.
pub fn pmd(u: UserId, v: UserId, ctx: &MeasureContext<'_>) -> Result<MeasureResult> {
    match pmd_solution(u, v, ctx) {
        Ok((_, s)) => Ok(MeasureResult::distance(s.optimal_cost)),
        Err(Error::DegenerateUser(_)) => Ok(MeasureResult::uncomputable(ScoreKind::Distance)),
        Err(e) => Err(e),
    }
}
