#include "tng/graph_io.hpp"

#include <map>
#include <set>
#include <sstream>

#include "tng/error.hpp"
#include "tng/util.hpp"

namespace tng {

namespace {

std::string at_line(const std::string& file, std::size_t line_no) {
  return file + ":" + std::to_string(line_no);
}

}  // namespace

GeneGraph load_gene_graph(const std::string& nodes_file, const std::string& edges_file) {
  const auto node_lines = read_lines(nodes_file);
  if (node_lines.empty() || split(node_lines[0], '\t') !=
                                std::vector<std::string>{"gene_id", "symbol", "description"})
    throw DataError(nodes_file + ": expected header 'gene_id\\tsymbol\\tdescription'");
  std::vector<Gene> genes;
  std::set<std::string> ids;
  for (std::size_t i = 1; i < node_lines.size(); ++i) {
    if (node_lines[i].empty()) continue;
    const auto fields = split(node_lines[i], '\t');
    if (fields.size() != 3)
      throw DataError(at_line(nodes_file, i + 1) + ": expected 3 tab-separated fields");
    if (fields[0].empty()) throw DataError(at_line(nodes_file, i + 1) + ": empty gene_id");
    if (!ids.insert(fields[0]).second)
      throw DataError(at_line(nodes_file, i + 1) + ": duplicate gene_id '" + fields[0] + "'");
    genes.push_back(Gene{fields[0], fields[1], fields[2]});
  }

  const auto edge_lines = read_lines(edges_file);
  if (edge_lines.empty() || split(edge_lines[0], '\t') !=
                                std::vector<std::string>{"src_id", "dst_id", "edge_type"})
    throw DataError(edges_file + ": expected header 'src_id\\tdst_id\\tedge_type'");
  std::map<std::string, int> index;
  for (std::size_t i = 0; i < genes.size(); ++i) index[genes[i].id] = static_cast<int>(i);
  std::vector<GraphEdge> edges;
  std::set<std::pair<int, int>> seen;
  for (std::size_t i = 1; i < edge_lines.size(); ++i) {
    if (edge_lines[i].empty()) continue;
    const auto fields = split(edge_lines[i], '\t');
    if (fields.size() != 3)
      throw DataError(at_line(edges_file, i + 1) + ": expected 3 tab-separated fields");
    const auto src = index.find(fields[0]);
    if (src == index.end())
      throw DataError(at_line(edges_file, i + 1) + ": unknown gene '" + fields[0] + "'");
    const auto dst = index.find(fields[1]);
    if (dst == index.end())
      throw DataError(at_line(edges_file, i + 1) + ": unknown gene '" + fields[1] + "'");
    const long type = parse_long(fields[2], at_line(edges_file, i + 1));
    if (type < 0) throw DataError(at_line(edges_file, i + 1) + ": negative edge_type");
    if (!seen.emplace(src->second, dst->second).second)
      throw DataError(at_line(edges_file, i + 1) + ": duplicate edge");
    edges.push_back({src->second, dst->second, static_cast<int>(type)});
  }
  return GeneGraph(std::move(genes), std::move(edges));
}

void save_gene_graph(const GeneGraph& graph, const std::string& nodes_file,
                     const std::string& edges_file) {
  std::ostringstream nodes;
  nodes << "gene_id\tsymbol\tdescription\n";
  for (const Gene& g : graph.genes())
    nodes << g.id << '\t' << g.symbol << '\t' << g.description << '\n';
  write_file_atomic(nodes_file, nodes.str());

  std::ostringstream edges;
  edges << "src_id\tdst_id\tedge_type\n";
  for (const GraphEdge& e : graph.edges())
    edges << graph.genes()[static_cast<std::size_t>(e.src)].id << '\t'
          << graph.genes()[static_cast<std::size_t>(e.dst)].id << '\t' << e.type << '\n';
  write_file_atomic(edges_file, edges.str());
}

PathList load_paths(const std::string& paths_file, const GeneGraph& graph) {
  PathList paths;
  const auto lines = read_lines(paths_file);
  std::set<std::string> ids;
  for (std::size_t i = 0; i < lines.size(); ++i) {
    if (lines[i].empty()) continue;
    const auto fields = split(lines[i], '\t');
    if (fields.size() != 2)
      throw DataError(at_line(paths_file, i + 1) + ": expected 'path_id\\tgene,gene,...'");
    if (!ids.insert(fields[0]).second)
      throw DataError(at_line(paths_file, i + 1) + ": duplicate path_id '" + fields[0] + "'");
    std::vector<int> nodes;
    for (const std::string& gene_id : split(fields[1], ',')) {
      const auto idx = graph.find_gene(trim(gene_id));
      if (!idx)
        throw DataError(at_line(paths_file, i + 1) + ": unknown gene '" + gene_id + "'");
      nodes.push_back(*idx);
    }
    paths.ids.push_back(fields[0]);
    paths.paths.push_back(std::move(nodes));
  }
  return paths;
}

void save_paths(const PathList& paths, const GeneGraph& graph, const std::string& paths_file) {
  std::ostringstream out;
  for (int m = 0; m < paths.p(); ++m) {
    out << paths.ids[static_cast<std::size_t>(m)] << '\t';
    const auto& nodes = paths.paths[static_cast<std::size_t>(m)];
    for (std::size_t i = 0; i < nodes.size(); ++i) {
      if (i) out << ',';
      out << graph.genes()[static_cast<std::size_t>(nodes[i])].id;
    }
    out << '\n';
  }
  write_file_atomic(paths_file, out.str());
}

ExpressionDataset load_dataset(const std::string& expression_file,
                               const std::string& labels_file, const GeneGraph& graph) {
  const auto expr_lines = read_lines(expression_file);
  if (expr_lines.empty()) throw DataError(expression_file + ": empty file");
  const auto header = split(expr_lines[0], '\t');
  if (header.empty() || header[0] != "cell_id")
    throw DataError(expression_file + ": first column must be 'cell_id'");

  // Column -> graph index; columns for genes outside the graph are ignored
  // with a warning, graph genes missing a column are filled with 0.
  std::vector<int> column_gene(header.size(), -1);
  std::set<int> covered;
  for (std::size_t c = 1; c < header.size(); ++c) {
    const auto idx = graph.find_gene(header[c]);
    if (!idx) {
      warn(expression_file + ": column '" + header[c] + "' is not in the gene graph; ignored");
      continue;
    }
    column_gene[c] = *idx;
    covered.insert(*idx);
  }
  for (const Gene& g : graph.genes())
    if (!covered.count(*graph.find_gene(g.id)))
      warn(expression_file + ": no expression for gene '" + g.id + "'; using 0");

  struct LabelRow {
    int label;
    std::string population;
    std::optional<double> time;
  };
  const auto label_lines = read_lines(labels_file);
  if (label_lines.empty() ||
      split(label_lines[0], '\t') !=
          std::vector<std::string>{"cell_id", "label", "population", "time"})
    throw DataError(labels_file + ": expected header 'cell_id\\tlabel\\tpopulation\\ttime'");
  std::map<std::string, LabelRow> labels;
  for (std::size_t i = 1; i < label_lines.size(); ++i) {
    if (label_lines[i].empty()) continue;
    const auto fields = split(label_lines[i], '\t');
    if (fields.size() != 4)
      throw DataError(at_line(labels_file, i + 1) + ": expected 4 tab-separated fields");
    const long label = parse_long(fields[1], at_line(labels_file, i + 1));
    if (label != 0 && label != 1)
      throw DataError(at_line(labels_file, i + 1) + ": label must be 0 or 1");
    LabelRow row{static_cast<int>(label), fields[2], std::nullopt};
    if (!trim(fields[3]).empty()) {
      const double time = parse_double(fields[3], at_line(labels_file, i + 1));
      if (time < 0.0) throw DataError(at_line(labels_file, i + 1) + ": negative time");
      row.time = time;
    }
    if (!labels.emplace(fields[0], row).second)
      throw DataError(at_line(labels_file, i + 1) + ": duplicate cell_id '" + fields[0] + "'");
  }

  ExpressionDataset dataset;
  dataset.n_genes = graph.n();
  std::set<std::string> seen_cells;
  for (std::size_t i = 1; i < expr_lines.size(); ++i) {
    if (expr_lines[i].empty()) continue;
    const auto fields = split(expr_lines[i], '\t');
    if (fields.size() != header.size())
      throw DataError(at_line(expression_file, i + 1) + ": field count differs from header");
    CellRecord cell;
    cell.id = fields[0];
    if (!seen_cells.insert(cell.id).second)
      throw DataError(at_line(expression_file, i + 1) + ": duplicate cell_id '" + cell.id + "'");
    cell.expression = Vector::Zero(graph.n());
    for (std::size_t c = 1; c < fields.size(); ++c) {
      if (column_gene[c] < 0) continue;
      cell.expression[column_gene[c]] =
          parse_double(fields[c], at_line(expression_file, i + 1));
    }
    const auto label = labels.find(cell.id);
    if (label == labels.end())
      throw DataError(at_line(expression_file, i + 1) + ": no label for cell '" + cell.id + "'");
    cell.label = label->second.label;
    cell.population = label->second.population;
    cell.time = label->second.time;
    dataset.cells.push_back(std::move(cell));
  }
  for (const auto& [cell_id, row] : labels)
    if (!seen_cells.count(cell_id))
      throw DataError(labels_file + ": label for unknown cell '" + cell_id + "'");
  return dataset;
}

void save_dataset(const ExpressionDataset& dataset, const GeneGraph& graph,
                  const std::string& expression_file, const std::string& labels_file) {
  std::ostringstream expr;
  expr << "cell_id";
  for (const Gene& g : graph.genes()) expr << '\t' << g.id;
  expr << '\n';
  for (const CellRecord& cell : dataset.cells) {
    expr << cell.id;
    for (Index g = 0; g < cell.expression.size(); ++g)
      expr << '\t' << format_double(cell.expression[g]);
    expr << '\n';
  }
  write_file_atomic(expression_file, expr.str());

  std::ostringstream labels;
  labels << "cell_id\tlabel\tpopulation\ttime\n";
  for (const CellRecord& cell : dataset.cells) {
    labels << cell.id << '\t' << cell.label << '\t' << cell.population << '\t';
    if (cell.time) labels << format_double(*cell.time);
    labels << '\n';
  }
  write_file_atomic(labels_file, labels.str());
}

}  // namespace tng
