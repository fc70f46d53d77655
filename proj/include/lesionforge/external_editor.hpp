#pragma once

// Out-of-process lesion editor.
//
// Each call creates a private request directory under the scratch root
// ($LESIONFORGE_SCRATCH, else the system temp directory) containing
//
//   volume.nii.gz   input intensities (float64)
//   mask.nii.gz     region to edit (uint8)
//   exclude.nii.gz  voxels not to be used as healthy context (uint8)
//   request.json    {"mode": "inpaint"|"generate", "seed": u64, "blend_margin": int}
//
// and runs `command... <request_dir>`. The handler writes output.nii.gz into
// the same directory and exits 0. Its stdout/stderr go to handler.log, which
// is attached to any failure.

#include <fcntl.h>
#include <signal.h>
#include <spawn.h>
#include <sys/wait.h>
#include <unistd.h>

#include <chrono>
#include <cstring>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "lesionforge/augment_io.hpp"
#include "lesionforge/nifti.hpp"
#include "lesionforge/synth.hpp"

extern char** environ;

namespace lesionforge {

enum class EditMode { inpaint, generate };

inline const char* edit_mode_name(EditMode m) { return m == EditMode::inpaint ? "inpaint" : "generate"; }

inline std::filesystem::path scratch_root() {
    if (const char* env = std::getenv("LESIONFORGE_SCRATCH"); env && *env) return env;
    return std::filesystem::temp_directory_path();
}

namespace detail {

inline std::string read_text(const std::filesystem::path& p, std::size_t limit = 8192) {
    std::ifstream in(p);
    if (!in) return {};
    std::string s((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    if (s.size() > limit) s = s.substr(s.size() - limit);
    return s;
}

/// RAII scratch directory.
class ScratchDir {
public:
    explicit ScratchDir(const std::filesystem::path& root) {
        std::filesystem::create_directories(root);
        std::string tmpl = (root / "lesionforge-edit-XXXXXX").string();
        if (!mkdtemp(tmpl.data())) throw IoError("external editor: cannot create scratch directory in " + root.string());
        path_ = tmpl;
    }
    ~ScratchDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    ScratchDir(const ScratchDir&) = delete;
    ScratchDir& operator=(const ScratchDir&) = delete;
    const std::filesystem::path& path() const { return path_; }

private:
    std::filesystem::path path_;
};

}  // namespace detail

class ExternalEditor final : public LesionEditor {
public:
    explicit ExternalEditor(std::vector<std::string> command, std::chrono::milliseconds timeout = std::chrono::seconds(120))
        : command_(std::move(command)), timeout_(timeout) {
        if (command_.empty()) throw ParameterError("external editor: empty command");
    }

    Volume inpaint(const Volume& v, const BinaryMask& region, const BinaryMask& context_exclusion,
                   std::uint64_t seed) const override {
        return run(EditMode::inpaint, v, region, context_exclusion, seed);
    }
    Volume generate(const Volume& v, const BinaryMask& region, const BinaryMask& context_exclusion,
                    std::uint64_t seed) const override {
        return run(EditMode::generate, v, region, context_exclusion, seed);
    }

    const std::vector<std::string>& command() const { return command_; }

private:
    Volume run(EditMode mode, const Volume& v, const BinaryMask& region, const BinaryMask& exclusion,
               std::uint64_t seed) const {
        require_same_geometry(v, region, "external editor");
        detail::ScratchDir dir(scratch_root());
        const auto& d = dir.path();
        save_volume(v, d / "volume.nii.gz", NiftiType::float64);
        save_mask(region, d / "mask.nii.gz");
        save_mask(exclusion.data.empty() ? BinaryMask(v.geometry) : exclusion, d / "exclude.nii.gz");
        write_json_file({{"mode", edit_mode_name(mode)}, {"seed", seed}, {"blend_margin", kBlendMargin}},
                        d / "request.json");

        const auto log_path = d / "handler.log";
        std::vector<std::string> args = command_;
        args.push_back(d.string());
        std::vector<char*> argv;
        for (auto& a : args) argv.push_back(a.data());
        argv.push_back(nullptr);

        posix_spawn_file_actions_t actions;
        posix_spawn_file_actions_init(&actions);
        posix_spawn_file_actions_addopen(&actions, STDOUT_FILENO, log_path.c_str(), O_WRONLY | O_CREAT | O_TRUNC, 0644);
        posix_spawn_file_actions_adddup2(&actions, STDOUT_FILENO, STDERR_FILENO);
        pid_t pid = 0;
        const int rc = posix_spawnp(&pid, argv[0], &actions, nullptr, argv.data(), environ);
        posix_spawn_file_actions_destroy(&actions);
        if (rc != 0)
            throw EditorFailureError("external editor: cannot start '" + command_.front() + "': " + std::strerror(rc));

        const auto deadline = std::chrono::steady_clock::now() + timeout_;
        int status = 0;
        for (;;) {
            const pid_t r = waitpid(pid, &status, WNOHANG);
            if (r == pid) break;
            if (r < 0) throw EditorFailureError("external editor: waitpid failed");
            if (std::chrono::steady_clock::now() >= deadline) {
                kill(pid, SIGKILL);
                waitpid(pid, &status, 0);
                throw EditorFailureError("external editor: handler timed out after " +
                                             std::to_string(timeout_.count()) + " ms",
                                         detail::read_text(log_path));
            }
            std::this_thread::sleep_for(std::chrono::milliseconds(5));
        }
        if (!WIFEXITED(status) || WEXITSTATUS(status) != 0) {
            const std::string how = WIFEXITED(status) ? "exited with status " + std::to_string(WEXITSTATUS(status))
                                                      : "was terminated by a signal";
            throw EditorFailureError("external editor: handler " + how, detail::read_text(log_path));
        }

        const auto out_path = d / "output.nii.gz";
        if (!std::filesystem::exists(out_path))
            throw EditorFailureError("external editor: handler wrote no output.nii.gz", detail::read_text(log_path));
        Volume out;
        try {
            out = load_volume(out_path);
        } catch (const Error& e) {
            throw EditorFailureError(std::string("external editor: unreadable output: ") + e.what(),
                                     detail::read_text(log_path));
        }
        // The header stores the affine in single precision.
        if (!out.geometry.same_as(v.geometry, 1e-3))
            throw EditorFailureError("external editor: geometry mismatch (" + out.geometry.describe() + " returned, " +
                                         v.geometry.describe() + " expected)",
                                     detail::read_text(log_path));
        out.geometry = v.geometry;
        return out;
    }

    std::vector<std::string> command_;
    std::chrono::milliseconds timeout_;
};

/// Serves one request directory with the baseline editor. This is what the
/// `lesionforge edit-handler` subcommand runs.
inline void serve_edit_request(const std::filesystem::path& dir) {
    const json req = read_json_file(dir / "request.json");
    const auto mode = req.at("mode").get<std::string>();
    const auto seed = req.at("seed").get<std::uint64_t>();
    const Volume v = load_volume(dir / "volume.nii.gz");
    BinaryMask region = load_mask(dir / "mask.nii.gz");
    region.geometry = v.geometry;
    BinaryMask exclusion(v.geometry);
    if (std::filesystem::exists(dir / "exclude.nii.gz")) {
        exclusion = load_mask(dir / "exclude.nii.gz");
        exclusion.geometry = v.geometry;
    }
    Volume out;
    if (mode == "inpaint") out = baseline_inpaint(v, region, seed, exclusion);
    else if (mode == "generate") out = baseline_generate(v, region, seed, exclusion);
    else throw ParameterError("edit request: unknown mode '" + mode + "'");
    save_volume(out, dir / "output.nii.gz", NiftiType::float64);
}

}  // namespace lesionforge
