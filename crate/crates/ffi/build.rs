use std::path::PathBuf;

fn main() {
    let dir = PathBuf::from(std::env::var("CARGO_MANIFEST_DIR").unwrap());
    let config = cbindgen::Config::from_file(dir.join("cbindgen.toml")).expect("cbindgen.toml");
    println!("cargo:rerun-if-changed=src/lib.rs");
    println!("cargo:rerun-if-changed=cbindgen.toml");
    let bindings = cbindgen::Builder::new()
        .with_crate(&dir)
        .with_config(config)
        .generate()
        .expect("header generation");
    let header = dir.join("include").join("ddsim.h");
    let mut buf = Vec::new();
    bindings.write(&mut buf);
    if std::fs::read(&header).ok().as_deref() != Some(buf.as_slice()) {
        std::fs::create_dir_all(header.parent().unwrap()).unwrap();
        std::fs::write(&header, buf).unwrap();
    }
}
