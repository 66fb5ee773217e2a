//! Writes the bundled demonstration, scene and start files.
//!
//! cargo run -p improvise --example bundle_data -- data

use std::fs;
use std::path::Path;

use improvise::sampling::rng_from_seed;
use improvise::tasks::{caged_tidy, lid_box_demos, lid_box_scene, random_start_state, tidy_demos, tidy_scene, MAX_START_ATTEMPTS};

fn write(path: &Path, value: &impl serde::Serialize) {
    let mut text = serde_json::to_string_pretty(value).unwrap();
    text.push('\n');
    fs::write(path, text).unwrap();
}

fn main() {
    let root = std::env::args().nth(1).unwrap_or_else(|| "data".into());
    let root = Path::new(&root);

    let dir = root.join("lid_box");
    fs::create_dir_all(&dir).unwrap();
    for (i, d) in lid_box_demos::<f64>(5, 1).iter().enumerate() {
        write(&dir.join(format!("demo_{}.json", i + 1)), d);
    }
    let scene = lid_box_scene::<f64>();
    write(&dir.join("scene.json"), &scene);
    write(
        &dir.join("start.json"),
        &random_start_state(&scene, &mut rng_from_seed(1000), MAX_START_ATTEMPTS).unwrap(),
    );

    let dir = root.join("tidy");
    fs::create_dir_all(&dir).unwrap();
    for (i, d) in tidy_demos::<f64>(5, 1).iter().enumerate() {
        write(&dir.join(format!("demo_{}.json", i + 1)), d);
    }
    write(&dir.join("scene.json"), &tidy_scene::<f64>());
    let (caged, start) = caged_tidy::<f64>();
    write(&dir.join("caged_scene.json"), &caged);
    write(&dir.join("caged_start.json"), &start);
}
