//! Entangler layout from the maximum mutual-information spanning tree of
//! the 3x3 bars-and-stripes data.

use qcbm::architecture::{chow_liu_edges, mutual_information, tree_weight};
use qcbm::datasets::BasDataset;

fn main() -> qcbm::Result<()> {
    let bas = BasDataset::bars_and_stripes_3x3();
    let info = mutual_information(bas.n(), bas.patterns())?;
    for s in 0..bas.n() {
        let row: Vec<String> = (0..bas.n()).map(|t| format!("{:.3}", info.get(s, t))).collect();
        println!("{}", row.join(" "));
    }
    let edges = chow_liu_edges(&info, 1)?;
    println!("tree weight {:.4} nats", tree_weight(&info, &edges));
    for (a, b) in edges {
        let (ra, ca, rb, cb) = (a / 3, a % 3, b / 3, b % 3);
        let kind = if ra == rb { "same row" } else if ca == cb { "same column" } else { "diagonal" };
        println!("CNOT {a} -> {b}  ({kind})");
    }
    Ok(())
}
