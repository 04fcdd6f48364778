#pragma once

#include <string>

#include "tng/graph.hpp"

namespace tng {

// TSV ingestion and emission for the gene graph, path list and expression
// dataset. Errors carry file names and 1-based line numbers. Saved files
// round-trip 64-bit values exactly.

GeneGraph load_gene_graph(const std::string& nodes_file, const std::string& edges_file);
void save_gene_graph(const GeneGraph& graph, const std::string& nodes_file,
                     const std::string& edges_file);

PathList load_paths(const std::string& paths_file, const GeneGraph& graph);
void save_paths(const PathList& paths, const GeneGraph& graph, const std::string& paths_file);

ExpressionDataset load_dataset(const std::string& expression_file,
                               const std::string& labels_file, const GeneGraph& graph);
void save_dataset(const ExpressionDataset& dataset, const GeneGraph& graph,
                  const std::string& expression_file, const std::string& labels_file);

}  // namespace tng
