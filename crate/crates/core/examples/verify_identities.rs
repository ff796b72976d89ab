//! Runs every numerical oracle on the worked example and prints the table
//! followed by the machine-readable report.

use ltv_observer::make_example_scenario;
use ltv_observer::verify::verify_all;

fn main() -> Result<(), ltv_observer::Error> {
    let report = verify_all(&make_example_scenario())?;
    print!("{}", report.table());
    println!();
    print!("{}", report.to_kv());
    Ok(())
}
