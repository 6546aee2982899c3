//! Guessing bounds for the usual phrase counts and group widths.

use vaulted_voice::eval::security_report;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    println!("phrases  bits/question  response bits  guess success");
    for b in [1, 2] {
        for n in 8..=12 {
            let r = security_report(n, b, true)?;
            println!("{n:7}  {b:13}  {:13}  {:>10}%  ({:e})", r.total_bits, r.percent_2dp(), r.probability);
        }
    }
    println!();
    print!("{}", security_report(12, 2, false)?.to_text());
    Ok(())
}
