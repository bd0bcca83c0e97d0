//! Reading and writing LIBSVM-format data.
//!
//! `cargo run --example load_libsvm -- data.svm` loads a file; without an
//! argument a small synthetic set is round-tripped through memory.

use std::io::Cursor;

use proxtone::datasets::{load_libsvm, parse_libsvm, synth_logistic, write_libsvm, LabelMap};

fn main() -> proxtone::Result<()> {
    let data = match std::env::args().nth(1) {
        Some(path) => load_libsvm(path, &LabelMap::signed())?,
        None => {
            let data = synth_logistic(10, 200, 0.3, 1)?;
            let mut buf = Vec::new();
            write_libsvm(&data, &mut buf)?;
            println!("first line: {}", String::from_utf8_lossy(&buf).lines().next().unwrap_or(""));
            let back = parse_libsvm(Cursor::new(buf), &LabelMap::signed())?;
            assert_eq!(back, data);
            back
        }
    };
    println!("{} samples, {} features, {:.1}% positive", data.sample_count(), data.dim(), 100.0 * data.positive_fraction());

    // labels other than ±1 need a map, e.g. {1, 2} -> {-1, +1}
    let map = LabelMap::parse("1:-1,2:1")?;
    println!("label 2 maps to {:?}", map.translate(2.0));
    Ok(())
}
