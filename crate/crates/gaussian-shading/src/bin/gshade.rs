fn main() {
    std::process::exit(gaussian_shading::cli::run());
}
