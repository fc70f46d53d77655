// lesionforge: batch augmentation, pair synthesis, evaluation and statistics.

#include <CLI11.hpp>

#include <iostream>

#include "lesionforge/commands.hpp"

using namespace lesionforge;

int main(int argc, char** argv) {
    CLI::App app{"lesionforge: volumetric augmentation, lesion synthesis and lesion-wise evaluation"};
    app.require_subcommand(1);
    app.set_version_flag("--version", "lesionforge 0.1.0");

    AugmentOptions aug;
    auto* augment = app.add_subcommand("augment", "apply sampled artifact plans to every FLAIR volume in a manifest");
    augment->add_option("--manifest", aug.manifest, "dataset manifest (JSON or CSV)")->required();
    augment->add_option("--config", aug.config, "sampling policy JSON");
    augment->add_option("--seed", aug.seed, "root seed")->default_val(0);
    augment->add_option("--jobs", aug.jobs, "concurrent cases")->default_val(default_jobs());
    augment->add_option("--out", aug.out_dir, "output directory")->required();

    SynthesizeOptions syn;
    long timeout_s = 120;
    auto* synthesize = app.add_subcommand("synthesize", "generate synthetic longitudinal pairs");
    synthesize->add_option("--manifest", syn.manifest, "dataset manifest with flair and lesion_mask")->required();
    synthesize->add_option("--config", syn.config, "synthesis policy JSON");
    synthesize->add_option("--editor", syn.editor, "'baseline' or an external handler command")->default_val("baseline");
    synthesize->add_option("--editor-timeout", timeout_s, "external handler timeout in seconds")->default_val(120);
    synthesize->add_option("--pairs", syn.n_pairs, "pairs per case")->default_val(1);
    synthesize->add_option("--seed", syn.seed, "root seed")->default_val(0);
    synthesize->add_option("--jobs", syn.jobs, "concurrent cases")->default_val(default_jobs());
    synthesize->add_option("--out", syn.out_dir, "output directory")->required();

    EvaluateOptions ev;
    auto* evaluate = app.add_subcommand("evaluate", "score predictions against ground truth");
    evaluate->add_option("--manifest", ev.manifests, "manifest(s) with prediction and gt entries")->required();
    evaluate->add_option("--config", ev.config, "detection thresholds JSON");
    evaluate->add_option("--jobs", ev.jobs, "concurrent cases")->default_val(default_jobs());
    evaluate->add_option("--out", ev.report, "report JSON path")->required();

    CompareOptions cmp;
    auto* compare = app.add_subcommand("compare", "paired Wilcoxon signed-rank test between two reports");
    compare->add_option("report_a", cmp.report_a)->required();
    compare->add_option("report_b", cmp.report_b)->required();
    compare->add_option("--metric", cmp.metric, "avg_score, dice, les_f1, lesion_sensitivity or lesion_ppv")
        ->default_val("avg_score");
    compare->add_option("--method-a", cmp.method_a, "method in report A");
    compare->add_option("--method-b", cmp.method_b, "method in report B");

    ConsensusOptions con;
    auto* consensus_cmd = app.add_subcommand("consensus", "threshold the mean of probability maps");
    consensus_cmd->add_option("maps", con.maps, "probability maps")->required();
    consensus_cmd->add_option("--threshold", con.threshold)->default_val(0.5);
    consensus_cmd->add_option("--out", con.out, "output mask")->required();

    std::string request_dir;
    auto* handler = app.add_subcommand("edit-handler", "serve one external-editor request with the baseline editor");
    handler->add_option("request_dir", request_dir)->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? kExitOk : kExitUsage;
    }

    if (*augment) return cmd_augment(aug);
    if (*synthesize) {
        syn.editor_timeout = std::chrono::seconds(timeout_s);
        return cmd_synthesize(syn);
    }
    if (*evaluate) return cmd_evaluate(ev);
    if (*compare) return cmd_compare(cmp);
    if (*consensus_cmd) return cmd_consensus(con);
    if (*handler) {
        try {
            serve_edit_request(request_dir);
            return kExitOk;
        } catch (const std::exception& e) {
            std::cerr << "edit-handler: " << e.what() << '\n';
            return kExitUsage;
        }
    }
    return kExitUsage;
}
