//! The `synth` subcommand: deterministic dataset generation with the ground
//! truth written alongside.

use std::fs;
use std::path::PathBuf;

use serde_json::json;

use groupprune::synth::{planted_block_teacher, planted_group_regression, TeacherSpec};

use crate::config::SynthSpec;
use crate::data::{fmt_f64, write_csv};
use crate::experiments::to_runtime;
use crate::runner::resolve_output_root;
use crate::CliError;

/// Generate the dataset files for a spec. Returns the directory written.
pub fn generate(spec: &SynthSpec) -> Result<PathBuf, CliError> {
    match spec {
        SynthSpec::PlantedGroupSparseRegression {
            seed,
            num_features,
            num_groups,
            planted,
            noise,
            output_dir,
        } => {
            if *planted == 0 || planted > num_groups {
                return Err(CliError::Config(format!(
                    "cannot plant {planted} groups out of {num_groups}"
                )));
            }
            let dir = resolve_output_root(output_dir.as_deref()).join("synth_regression");
            fs::create_dir_all(&dir)?;
            let inst =
                planted_group_regression(*seed, *num_features, *num_groups, *planted, *noise, 0.0);
            let mut header: Vec<String> = (0..*num_features).map(|j| format!("x{j}")).collect();
            header.push("y".into());
            let header_refs: Vec<&str> = header.iter().map(|s| s.as_str()).collect();
            let rows: Vec<Vec<String>> = (0..inst.x.nrows())
                .map(|i| {
                    let mut row: Vec<String> = inst.x.row(i).iter().map(|v| fmt_f64(*v)).collect();
                    row.push(fmt_f64(inst.y[(i, 0)]));
                    row
                })
                .collect();
            write_csv(&dir.join("train.csv"), &header_refs, &rows)?;
            let truth = json!({
                "kind": "planted_group_sparse_regression",
                "seed": seed,
                "planted_groups": inst.planted_groups,
                "beta_star": inst.beta_star,
                "groups": inst.partition.groups(),
                "noise": noise,
            });
            fs::write(
                dir.join("ground_truth.json"),
                serde_json::to_string_pretty(&truth).expect("truth serializes") + "\n",
            )?;
            Ok(dir)
        }
        SynthSpec::PlantedBlockTeacherClassification {
            seed,
            num_features,
            hidden_width,
            num_classes,
            block_size,
            planted_blocks,
            num_train,
            num_eval,
            label_margin,
            output_dir,
        } => {
            let dir = resolve_output_root(output_dir.as_deref()).join("synth_teacher");
            fs::create_dir_all(&dir)?;
            let data = planted_block_teacher(&TeacherSpec {
                num_features: *num_features,
                hidden_width: *hidden_width,
                num_classes: *num_classes,
                block_size: *block_size,
                planted_blocks: *planted_blocks,
                num_train: *num_train,
                num_eval: *num_eval,
                seed: *seed,
                label_margin: *label_margin,
            })
            .map_err(to_runtime)?;
            let mut header: Vec<String> = (0..*num_features).map(|j| format!("x{j}")).collect();
            header.push("label".into());
            let header_refs: Vec<&str> = header.iter().map(|s| s.as_str()).collect();
            for (name, x, y) in [
                ("train.csv", &data.x_train, &data.y_train),
                ("eval.csv", &data.x_eval, &data.y_eval),
            ] {
                let rows: Vec<Vec<String>> = (0..x.nrows())
                    .map(|i| {
                        let mut row: Vec<String> = x.row(i).iter().map(|v| fmt_f64(*v)).collect();
                        row.push(y[i].to_string());
                        row
                    })
                    .collect();
                write_csv(&dir.join(name), &header_refs, &rows)?;
            }
            let truth = json!({
                "kind": "planted_block_teacher_classification",
                "seed": seed,
                "planted_blocks": data.planted,
                "block_size": block_size,
                "num_features": num_features,
                "hidden_width": hidden_width,
                "num_classes": num_classes,
            });
            fs::write(
                dir.join("ground_truth.json"),
                serde_json::to_string_pretty(&truth).expect("truth serializes") + "\n",
            )?;
            Ok(dir)
        }
    }
}
