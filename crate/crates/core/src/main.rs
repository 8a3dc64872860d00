fn main() {
    std::process::exit(comp_oc::cli::main());
}
