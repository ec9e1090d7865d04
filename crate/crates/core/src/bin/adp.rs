fn main() {
    std::process::exit(adp_track::cli::main());
}
