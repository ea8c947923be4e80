//! Construction of reaction terms, grids, fields and vector fields from flags.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use onephase::cases;
use onephase::field::{GridSpec, Point, ScalarField, VectorFieldSpec};
use onephase::potentials::ReactionTerm;

use crate::args::{FieldArgs, FieldKind, TermArgs};
use crate::output::{read_text, CliError, CliResult};

pub fn build_term(args: &TermArgs) -> CliResult<ReactionTerm> {
    match &args.term {
        Some(path) => Ok(ReactionTerm::from_json(&read_text(path)?)?),
        None => Ok(ReactionTerm::reference(args.support)?),
    }
}

pub fn square_grid(dim: usize, lo: f64, hi: f64, h: f64) -> CliResult<GridSpec> {
    match dim {
        1 => Ok(GridSpec::interval(lo, hi, h)?),
        2 => Ok(GridSpec::square(lo, hi, h)?),
        d => Err(onephase::Error::InvalidArgument(format!("dimension must be 1 or 2, got {d}")).into()),
    }
}

pub fn build_grid(args: &FieldArgs) -> CliResult<GridSpec> {
    match &args.grid {
        Some(path) => Ok(GridSpec::from_json(&read_text(path)?)?),
        None => square_grid(args.dim, args.lo, args.hi, args.h),
    }
}

pub fn build_field(args: &FieldArgs, term: &ReactionTerm, eps: f64) -> CliResult<ScalarField> {
    let grid = build_grid(args)?;
    let u = match args.kind {
        FieldKind::Profile => cases::profile_field(term, eps, &grid)?,
        FieldKind::Solution => cases::profile_solution(term, eps, &grid)?.0,
        FieldKind::Wedge => cases::wedge_field(term, eps, args.slope.unwrap_or(eps), &grid)?,
        FieldKind::Halfplane => cases::half_plane(&grid),
        FieldKind::Radial => cases::radial(&grid, args.radius),
        FieldKind::File => {
            let path =
                args.field.as_ref().ok_or_else(|| CliError::Op(onephase::Error::InvalidArgument("kind = file needs --field".into())))?;
            ScalarField::from_csv(&read_text(path)?, &grid)?
        }
    };
    Ok(u)
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// `count` random admitted vector fields supported in the box `center ± half`.
pub fn random_vector_fields(
    seed: u64,
    dim: usize,
    center: Point,
    half: f64,
    amplitude: f64,
    count: usize,
) -> CliResult<Vec<VectorFieldSpec>> {
    let mut r = rng(seed);
    let lo = [center[0] - half, center[1] - half];
    let hi = [center[0] + half, center[1] + half];
    (0..count).map(|_| Ok(VectorFieldSpec::random(&mut r, dim, lo, hi, amplitude)?)).collect()
}

pub fn load_vector_field(path: &std::path::Path) -> CliResult<VectorFieldSpec> {
    Ok(VectorFieldSpec::from_json(&read_text(path)?)?)
}
