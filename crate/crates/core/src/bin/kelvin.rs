fn main() {
    std::process::exit(kelvin_tensor::cli::run(std::env::args_os()));
}
