//! `budget`: end-to-end collection arithmetic from the per-side coupled
//! fraction, the taper transmission, and a confocal reference efficiency.

use clap::Args;

use nanofiber_core::dipole_coupling::efficiency_budget;

use crate::error::Result;

#[derive(Args)]
pub struct BudgetArgs {
    /// Fraction of emitted photons coupled into one propagation direction.
    #[arg(long)]
    beta_side: f64,
    /// Power transmission from the waist to the fiber end.
    #[arg(long = "fiber-T")]
    fiber_t: f64,
    /// End-to-end efficiency of the confocal reference setup.
    #[arg(long)]
    confocal: f64,
    /// Print the budget as JSON instead of the table.
    #[arg(long)]
    json: bool,
}

pub fn run(args: BudgetArgs) -> Result<()> {
    let budget = efficiency_budget(args.beta_side, args.fiber_t, args.confocal)?;
    if args.json {
        println!(
            "{}",
            serde_json::json!({
                "beta_side": budget.beta_side,
                "fiber_transmission": budget.fiber_transmission,
                "confocal_efficiency": budget.confocal_efficiency,
                "end_to_end_one_side": budget.end_to_end_one_side,
                "end_to_end_two_side": budget.end_to_end_two_side,
                "fiber_to_confocal_ratio": budget.fiber_to_confocal_ratio,
            })
        );
        return Ok(());
    }
    println!("coupled fraction per side      : {:.1}%", budget.beta_side * 100.0);
    println!("taper-to-end transmission      : {:.1}%", budget.fiber_transmission * 100.0);
    println!("confocal reference efficiency  : {:.1}%", budget.confocal_efficiency * 100.0);
    println!("one-side end-to-end efficiency : {:.1}%", budget.end_to_end_one_side * 100.0);
    println!("two-side end-to-end efficiency : {:.1}%", budget.end_to_end_two_side * 100.0);
    println!("fiber-to-confocal ratio        : {:.1}", budget.fiber_to_confocal_ratio);
    Ok(())
}
