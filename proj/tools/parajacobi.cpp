#include "parajacobi/run.hpp"

#include <CLI11.hpp>

#include <iostream>

int main(int argc, char** argv) {
    using namespace parajacobi;
    CLI::App app{"parajacobi: periodically modulated Jacobi matrices in the parabolic case"};
    app.require_subcommand(1);

    std::string config_path;
    Overrides ov;
    double x = 0.0, eta = 0.0;
    long long n = 0, j = 0;
    int threads = 0;
    std::string out;

    for (const auto& name : known_commands()) {
        auto* sub = app.add_subcommand(name);
        sub->add_option("--config", config_path, "JSON config file")->required()->check(CLI::ExistingFile);
        sub->add_option("--out", out, "output directory");
        sub->add_option("--x", x, "spectral parameter");
        sub->add_option("--eta", eta, "initial vector angle (radians)");
        sub->add_option("--n", n, "trace length or limit extraction n_max");
        sub->add_option("--j", j, "block index bound j_max");
        sub->add_option("--threads", threads, "worker threads (default PARAJACOBI_THREADS or all cores)");
    }
    CLI11_PARSE(app, argc, argv);

    CLI::App* sub = app.get_subcommands().front();
    if (sub->count("--x")) ov.x = x;
    if (sub->count("--eta")) ov.eta = eta;
    if (sub->count("--n")) ov.n = n;
    if (sub->count("--j")) ov.j = j;
    if (sub->count("--threads")) ov.threads = threads;
    if (sub->count("--out")) ov.out = out;

    try {
        Runner runner(load_config(config_path), ov);
        return runner.run(sub->get_name());
    } catch (const Error& e) {
        std::cerr << "parajacobi: " << to_string(e.kind()) << " error: " << e.what() << '\n';
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "parajacobi: " << e.what() << '\n';
        return 1;
    }
}
