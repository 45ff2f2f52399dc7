//! Block soft-thresholding on rows and columns.

use lgl::penalty::{norm_12_cols, norm_12_rows, prox_col_groups, prox_row_groups};
use ndarray::array;

fn main() {
    let p = array![[3.0, 4.0, 0.0], [0.3, 0.1, 0.2], [-1.0, 2.0, 2.0]];
    println!("P =\n{p}");
    println!("row-group norm {:.4}, column-group norm {:.4}", norm_12_rows(p.view()), norm_12_cols(p.view()));
    for theta in [0.5, 1.0, 3.0] {
        println!("\ntheta = {theta}");
        println!("rows:\n{:.4}", prox_row_groups(p.view(), theta));
        println!("columns:\n{:.4}", prox_col_groups(p.view(), theta));
    }
}
