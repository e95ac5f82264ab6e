// The LAPACK backend is linked against the system OpenBLAS instead of a
// *-src provider crate, so the build needs libopenblas in the usual place.
fn main() {
    println!("cargo:rustc-link-search=native=/usr/lib/x86_64-linux-gnu");
    println!("cargo:rustc-link-lib=dylib=openblas");
}
