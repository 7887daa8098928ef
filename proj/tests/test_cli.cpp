// SPDX-License-Identifier: Apache-2.0
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <sys/wait.h>
#include <unistd.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

using json = nlohmann::json;
namespace fs = std::filesystem;

namespace {

struct CmdResult {
    int exit_code = -1;
    std::string out;
    std::string err;
};

fs::path sandbox() {
    static const fs::path dir = [] {
        const auto p =
            fs::temp_directory_path() / ("seqdx_cli_test_" + std::to_string(::getpid()));
        fs::remove_all(p);
        fs::create_directories(p);
        return p;
    }();
    return dir;
}

std::string slurp(const fs::path& p) {
    std::ifstream f(p, std::ios::binary);
    std::stringstream ss;
    ss << f.rdbuf();
    return ss.str();
}

CmdResult run_cli(const std::string& args) {
    static int counter = 0;
    const auto out = sandbox() / ("out_" + std::to_string(counter));
    const auto err = sandbox() / ("err_" + std::to_string(counter));
    ++counter;
    const std::string cmd = std::string(SEQDX_CLI_PATH) + " " + args + " >" + out.string() +
                            " 2>" + err.string();
    const int rc = std::system(cmd.c_str());
    CmdResult result;
    result.exit_code = WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
    result.out = slurp(out);
    result.err = slurp(err);
    return result;
}

std::string tiny_config_file() {
    static const fs::path path = [] {
        const auto p = sandbox() / "tiny.cfg";
        std::ofstream f(p);
        f << "image_size = 16\n"
             "encoder_channels = 4\n"
             "fc_sizes = 8\n"
             "lstm_hidden = 6\n"
             "num_outputs = 1\n"
             "learning_rate = 0.05\n"
             "accumulation_k = 2\n"
             "epochs = 2\n"
             "seed = 3\n"
             "val_fraction = 0.25\n";
        return p;
    }();
    return path.string();
}

std::string tiny_dataset() {
    static const std::string dir = [] {
        const auto d = (sandbox() / "ds").string();
        auto r = run_cli("synth --out " + d +
                         " --patients 12 --seed 4 --image-size 16 --min-images 2 --max-images 3"
                         " --blob-radius 2 --prevalence 0.4");
        REQUIRE(r.exit_code == 0);
        return d;
    }();
    return dir;
}

int count_lines(const std::string& s) {
    int n = 0;
    for (char c : s) n += c == '\n';
    return n;
}

}  // namespace

TEST_CASE("synth writes the dataset layout and reports a summary") {
    const auto dir = sandbox() / "synth_a";
    auto r = run_cli("synth --out " + dir.string() + " --patients 10 --seed 1 --image-size 16");
    CHECK(r.exit_code == 0);
    CHECK(r.out.find("patients=10") != std::string::npos);
    CHECK(r.out.find("positive_rate_0=") != std::string::npos);
    CHECK(fs::exists(dir / "labels.csv"));
    CHECK(fs::exists(dir / "manifest.csv"));
    int patient_dirs = 0;
    for (const auto& e : fs::directory_iterator(dir)) patient_dirs += e.is_directory();
    CHECK(patient_dirs == 10);
}

TEST_CASE("synth is byte-reproducible for a fixed seed") {
    const auto a = sandbox() / "repro_a";
    const auto b = sandbox() / "repro_b";
    CHECK(run_cli("synth --out " + a.string() + " --patients 8 --seed 5 --image-size 16").exit_code == 0);
    CHECK(run_cli("synth --out " + b.string() + " --patients 8 --seed 5 --image-size 16").exit_code == 0);

    int compared = 0;
    for (const auto& entry : fs::recursive_directory_iterator(a)) {
        if (!entry.is_regular_file()) continue;
        const auto rel = fs::relative(entry.path(), a);
        CHECK(slurp(entry.path()) == slurp(b / rel));
        ++compared;
    }
    CHECK(compared > 8);
}

TEST_CASE("bad or missing flags exit with the usage code") {
    CHECK(run_cli("synth --patients 3").exit_code == 2);         // missing --out/--seed
    CHECK(run_cli("synth --out x --patients 3 --seed 1 --bogus-flag 7").exit_code == 2);
    CHECK(run_cli("definitely-not-a-command").exit_code == 2);
    CHECK(run_cli("").exit_code == 2);  // a subcommand is required
}

TEST_CASE("train runs, writes history rows and a loadable checkpoint") {
    const auto hist = sandbox() / "h.csv";
    const auto ckpt = sandbox() / "m.sqdx";
    auto r = run_cli("train --data " + tiny_dataset() + " --config " + tiny_config_file() +
                     " --out-history " + hist.string() + " --out-ckpt " + ckpt.string());
    CHECK(r.exit_code == 0);
    CHECK(r.out.find("epochs=2") != std::string::npos);
    CHECK(r.err.find("epoch 1/2") != std::string::npos);  // progress on stderr

    const std::string csv = slurp(hist);
    CHECK(count_lines(csv) == 3);  // header + one row per epoch
    CHECK(csv.rfind("epoch,train_loss,", 0) == 0);
    CHECK(fs::exists(ckpt));
}

TEST_CASE("config schema violations exit with the usage code") {
    const auto bad = sandbox() / "bad.cfg";
    std::ofstream(bad) << "image_size = 16\nencoder_channels = 4\nunknown_key = 1\n";
    auto r = run_cli("train --data " + tiny_dataset() + " --config " + bad.string());
    CHECK(r.exit_code == 2);
    CHECK(r.err.find("unknown_key") != std::string::npos);

    auto r2 = run_cli("train --data " + tiny_dataset() + " --config " + tiny_config_file() +
                      " --set threshold=2");
    CHECK(r2.exit_code == 2);
}

TEST_CASE("resume continues exactly where the uninterrupted run was") {
    const auto h_full = sandbox() / "full.csv";
    auto rf = run_cli("train --data " + tiny_dataset() + " --config " + tiny_config_file() +
                      " --set epochs=4 --out-history " + h_full.string());
    REQUIRE(rf.exit_code == 0);

    const auto ck = sandbox() / "half.sqdx";
    const auto h_resume = sandbox() / "resume.csv";
    REQUIRE(run_cli("train --data " + tiny_dataset() + " --config " + tiny_config_file() +
                    " --set epochs=2 --out-ckpt " + ck.string())
                .exit_code == 0);
    auto rr = run_cli("train --data " + tiny_dataset() + " --config " + tiny_config_file() +
                      " --set epochs=4 --resume " + ck.string() + " --out-history " +
                      h_resume.string());
    REQUIRE(rr.exit_code == 0);
    CHECK(rr.err.find("resuming at epoch 2") != std::string::npos);

    // the resumed epoch-2 row equals the uninterrupted one (all but the time column)
    auto row_of = [](const std::string& csv, const std::string& prefix) {
        std::stringstream ss(csv);
        std::string line;
        while (std::getline(ss, line)) {
            if (line.rfind(prefix, 0) == 0) return line.substr(0, line.rfind(','));
        }
        return std::string();
    };
    const std::string full_row = row_of(slurp(h_full), "2,");
    const std::string resumed_row = row_of(slurp(h_resume), "2,");
    CHECK(!full_row.empty());
    CHECK(full_row == resumed_row);
}

TEST_CASE("eval validates the threshold and reports per-disease metrics") {
    const auto ckpt = sandbox() / "eval_model.sqdx";
    REQUIRE(run_cli("train --data " + tiny_dataset() + " --config " + tiny_config_file() +
                    " --out-ckpt " + ckpt.string())
                .exit_code == 0);

    CHECK(run_cli("eval --data " + tiny_dataset() + " --ckpt " + ckpt.string() +
                  " --threshold 1.0")
              .exit_code == 2);
    CHECK(run_cli("eval --data " + tiny_dataset() + " --ckpt /nonexistent.sqdx").exit_code == 1);

    auto r = run_cli("eval --data " + tiny_dataset() + " --ckpt " + ckpt.string());
    CHECK(r.exit_code == 0);
    CHECK(r.out.find("hemorrhage") != std::string::npos);
    CHECK(r.out.find("combined_accuracy") != std::string::npos);

    auto rj = run_cli("eval --data " + tiny_dataset() + " --ckpt " + ckpt.string() + " --json");
    CHECK(rj.exit_code == 0);
    const json parsed = json::parse(rj.out);
    CHECK(parsed["diseases"].size() == 1);
    CHECK(parsed["diseases"][0].contains("accuracy"));
    CHECK(parsed["diseases"][0].contains("f1"));
    CHECK(parsed.contains("combined_accuracy"));
}

TEST_CASE("predict emits a probability vector for one patient directory") {
    const auto ckpt = sandbox() / "pred_model.sqdx";
    REQUIRE(run_cli("train --data " + tiny_dataset() + " --config " + tiny_config_file() +
                    " --out-ckpt " + ckpt.string())
                .exit_code == 0);

    std::string patient_dir;
    for (const auto& e : fs::directory_iterator(tiny_dataset())) {
        if (e.is_directory()) {
            patient_dir = e.path().string();
            break;
        }
    }
    REQUIRE(!patient_dir.empty());

    auto r = run_cli("predict --ckpt " + ckpt.string() + " --dir " + patient_dir);
    CHECK(r.exit_code == 0);
    CHECK(r.out.find("hemorrhage ") != std::string::npos);

    auto rj = run_cli("predict --ckpt " + ckpt.string() + " --dir " + patient_dir + " --json");
    CHECK(rj.exit_code == 0);
    const json parsed = json::parse(rj.out);
    CHECK(parsed["final_probs"].size() == 1);
    CHECK(parsed["per_step_probs"].size() >= 2);
    const double p = parsed["final_probs"][0].get<double>();
    CHECK(p >= 0.0);
    CHECK(p <= 1.0);

    CHECK(run_cli("predict --ckpt " + ckpt.string() + " --dir /no/such/dir").exit_code == 1);
}

TEST_CASE("five-output models train and evaluate on five-column labels") {
    const auto dir = sandbox() / "multi";
    REQUIRE(run_cli("synth --out " + dir.string() +
                    " --patients 10 --seed 6 --image-size 16 --min-images 2 --max-images 3"
                    " --blob-radius 2 --prevalence 0.4 --prevalence 0.3 --prevalence 0.3"
                    " --prevalence 0.3 --prevalence 0.2")
                .exit_code == 0);
    const auto ckpt = sandbox() / "multi.sqdx";
    auto rt = run_cli("train --data " + dir.string() + " --config " + tiny_config_file() +
                      " --set num_outputs=5 --out-ckpt " + ckpt.string());
    CHECK(rt.exit_code == 0);

    auto rj = run_cli("eval --data " + dir.string() + " --ckpt " + ckpt.string() + " --json");
    CHECK(rj.exit_code == 0);
    const json parsed = json::parse(rj.out);
    REQUIRE(parsed["diseases"].size() == 5);
    CHECK(parsed["diseases"][0]["name"] == "hemorrhage");
    CHECK(parsed["diseases"][4]["name"] == "edema");
}

TEST_CASE("train accepts a pure --set configuration without a file") {
    auto r = run_cli("train --data " + tiny_dataset() +
                     " --set image_size=16 --set encoder_channels=4 --set fc_sizes=8"
                     " --set lstm_hidden=6 --set epochs=1 --set seed=2 --set val_fraction=0.25");
    CHECK(r.exit_code == 0);
    CHECK(r.out.find("epochs=1") != std::string::npos);
}

TEST_CASE("resuming with a mismatched model config is a usage error") {
    const auto ck = sandbox() / "mismatch.sqdx";
    REQUIRE(run_cli("train --data " + tiny_dataset() + " --config " + tiny_config_file() +
                    " --set epochs=1 --out-ckpt " + ck.string())
                .exit_code == 0);
    auto r = run_cli("train --data " + tiny_dataset() + " --config " + tiny_config_file() +
                     " --set lstm_hidden=12 --resume " + ck.string());
    CHECK(r.exit_code == 2);
    CHECK(r.err.find("does not match") != std::string::npos);
}

TEST_CASE("the configured prevalence shows up in the summary") {
    auto r = run_cli("synth --out " + (sandbox() / "prev").string() +
                     " --patients 400 --seed 8 --image-size 8 --min-images 1 --max-images 2"
                     " --blob-radius 1 --prevalence 0.283");
    REQUIRE(r.exit_code == 0);
    const auto pos = r.out.find("positive_rate_0=");
    REQUIRE(pos != std::string::npos);
    const double rate = std::stod(r.out.substr(pos + 16));
    CHECK(std::abs(rate - 0.283) < 0.07);  // 3 sigma at n=400
}

TEST_CASE("a converged model on the noise-free task evaluates perfectly") {
    const auto dir = sandbox() / "clean";
    REQUIRE(run_cli("synth --out " + dir.string() +
                    " --patients 14 --seed 9 --image-size 16 --min-images 2 --max-images 3"
                    " --blob-radius 2 --noise-sigma 0 --prevalence 0.5")
                .exit_code == 0);
    const auto ckpt = sandbox() / "clean.sqdx";
    auto rt = run_cli("train --data " + dir.string() + " --config " + tiny_config_file() +
                      " --set epochs=40 --set learning_rate=0.1 --set augment_enabled=false"
                      " --out-ckpt " + ckpt.string());
    REQUIRE(rt.exit_code == 0);

    auto rj = run_cli("eval --data " + dir.string() + " --ckpt " + ckpt.string() + " --json");
    REQUIRE(rj.exit_code == 0);
    const json parsed = json::parse(rj.out);
    CHECK(parsed["combined_accuracy"].get<double>() == 1.0);
    CHECK(parsed["diseases"][0]["f1"].get<double>() == 1.0);
    CHECK(parsed["diseases"][0]["precision"].get<double>() == 1.0);
    CHECK(parsed["diseases"][0]["recall"].get<double>() == 1.0);
}

TEST_CASE("selfcheck passes from the command line") {
    auto r = run_cli("selfcheck --seed 7");
    CHECK(r.exit_code == 0);
    CHECK(count_lines(r.out) == 9);
    CHECK(r.out.find("FAIL") == std::string::npos);
}
