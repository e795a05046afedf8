//! Convergence orders of a tabulated study, read from CSV or from the
//! built-in adaptive table.

use invadapt::harness::{compute_eoc, read_csv, ConvergenceRow};

const TABLE: [(usize, f64); 2] = [(11439, 0.0863209), (78945, 0.0047541)];

fn main() -> invadapt::Result<()> {
    let rows: Vec<ConvergenceRow> = match std::env::args().nth(1) {
        Some(path) => read_csv(path)?,
        None => TABLE
            .iter()
            .map(|&(dofs, l2_error)| ConvergenceRow {
                dofs,
                l2_error,
                wall_seconds: 0.0,
            })
            .collect(),
    };
    let eoc = compute_eoc(&rows)?;
    for (w, p) in rows.windows(2).zip(&eoc.pairs) {
        match p {
            Some(p) => println!("{:>7} -> {:>7}: EOC_h {p:.3}  EOC_N {:.3}", w[0].dofs, w[1].dofs, p / 3.0),
            None => println!("{:>7} -> {:>7}: undefined", w[0].dofs, w[1].dofs),
        }
    }
    if let Some(a) = eoc.aggregate {
        println!("least-squares order {a:.3}");
    }
    for n in &eoc.notices {
        println!("note: {n}");
    }
    Ok(())
}
