// Radius and nearest-neighbour queries on a k-d tree.

use plsparse::spatial_index::SpatialIndex;

pub fn run_example() -> plsparse::Result<()> {
    let points: Vec<[f64; 3]> = (0..20)
        .flat_map(|i| (0..20).map(move |j| [i as f64 * 0.5, 0.0, j as f64 * 0.5]))
        .collect();
    let index = SpatialIndex::build(&points, 8)?;
    println!("{} points in {} leaves", index.len(), index.leaf_count());

    let centre = [2.0, 0.0, 2.0];
    let within = index.ball_query(&centre, 0.5)?;
    println!("within 0.5 m of {centre:?}: {within:?}");
    for (i, d) in index.knn_query(&[2.1, 0.0, 2.2], 3)? {
        println!("neighbour {i} at {d:.3} m");
    }
    Ok(())
}

fn main() -> plsparse::Result<()> {
    run_example()
}
