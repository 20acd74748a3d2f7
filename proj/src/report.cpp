#include <algorithm>
#include <fstream>
#include <sstream>

#include "evonet/experiment.hpp"
#include "json.hpp"

namespace evonet {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

namespace {

void write_file(const fs::path& path, const std::string& text) {
  std::ofstream f(path, std::ios::trunc);
  if (!f) throw std::runtime_error("cannot write " + path.string());
  f << text;
}

struct PlotPoint {
  double x, y;
  bool highlight;
};

// Minimal standalone SVG scatter/line plot.
std::string render_svg(const std::vector<PlotPoint>& points, bool connect,
                       const std::string& x_label, const std::string& y_label) {
  const int width = 640, height = 420, margin = 48;
  double x_min = 0, x_max = 1, y_min = 0, y_max = 1;
  if (!points.empty()) {
    x_min = x_max = points[0].x;
    y_min = y_max = points[0].y;
    for (const auto& p : points) {
      x_min = std::min(x_min, p.x);
      x_max = std::max(x_max, p.x);
      y_min = std::min(y_min, p.y);
      y_max = std::max(y_max, p.y);
    }
  }
  if (x_max <= x_min) x_max = x_min + 1;
  if (y_max <= y_min) y_max = y_min + 1;
  auto sx = [&](double x) {
    return margin + (x - x_min) / (x_max - x_min) * (width - 2 * margin);
  };
  auto sy = [&](double y) {
    return height - margin -
           (y - y_min) / (y_max - y_min) * (height - 2 * margin);
  };

  std::ostringstream svg;
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width
      << "\" height=\"" << height << "\">\n";
  svg << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  svg << "<line x1=\"" << margin << "\" y1=\"" << height - margin
      << "\" x2=\"" << width - margin << "\" y2=\"" << height - margin
      << "\" stroke=\"black\"/>\n";
  svg << "<line x1=\"" << margin << "\" y1=\"" << margin << "\" x2=\""
      << margin << "\" y2=\"" << height - margin << "\" stroke=\"black\"/>\n";
  svg << "<text x=\"" << width / 2 << "\" y=\"" << height - 10
      << "\" font-size=\"12\">" << x_label << "</text>\n";
  svg << "<text x=\"12\" y=\"" << height / 2
      << "\" font-size=\"12\" transform=\"rotate(-90 12 " << height / 2
      << ")\">" << y_label << "</text>\n";
  if (connect && points.size() > 1) {
    svg << "<polyline fill=\"none\" stroke=\"#1f77b4\" stroke-width=\"1.5\" "
           "points=\"";
    for (const auto& p : points) svg << sx(p.x) << "," << sy(p.y) << " ";
    svg << "\"/>\n";
  }
  for (const auto& p : points) {
    svg << "<circle cx=\"" << sx(p.x) << "\" cy=\"" << sy(p.y) << "\" r=\""
        << (p.highlight ? 3.5 : 2.0) << "\" fill=\""
        << (p.highlight ? "#1f77b4" : "#bbbbbb") << "\"/>\n";
  }
  svg << "</svg>\n";
  return svg.str();
}

std::string csv_accuracy(double v) {
  if (v < 0) return "";
  std::ostringstream out;
  out << v;
  return out.str();
}

}  // namespace

void emit_report(const RunReport& report, const fs::path& out_dir) {
  fs::create_directories(out_dir);

  {
    std::ostringstream csv;
    csv << "event_index,wall_s,individual_id,validation_accuracy,"
           "test_accuracy\n";
    for (const auto& p : report.best_curve)
      csv << p.event_index << "," << p.wall_s << "," << p.individual_id << ","
          << p.validation_accuracy << "," << csv_accuracy(p.test_accuracy)
          << "\n";
    write_file(out_dir / "series.csv", csv.str());
  }

  {
    std::ostringstream csv;
    csv << "id,parent_id,wall_s,validation_accuracy,test_accuracy,alive\n";
    for (const auto& p : report.individuals)
      csv << p.id << "," << p.parent_id << "," << p.wall_s << ","
          << p.validation_accuracy << "," << csv_accuracy(p.test_accuracy)
          << "," << (p.alive ? 1 : 0) << "\n";
    write_file(out_dir / "individuals.csv", csv.str());
  }

  {
    std::vector<PlotPoint> points;
    for (const auto& p : report.best_curve)
      points.push_back({p.wall_s,
                        p.test_accuracy >= 0 ? p.test_accuracy
                                             : p.validation_accuracy,
                        true});
    write_file(out_dir / "best_curve.svg",
               render_svg(points, true, "wall time (s)",
                          "test accuracy of best-by-validation"));
  }

  {
    std::vector<PlotPoint> points;
    for (const auto& p : report.individuals)
      points.push_back({p.wall_s,
                        p.test_accuracy >= 0 ? p.test_accuracy
                                             : p.validation_accuracy,
                        p.alive});
    write_file(out_dir / "scatter.svg",
               render_svg(points, false, "wall time (s)", "accuracy"));
  }

  {
    std::ostringstream text;
    for (size_t i = 0; i < report.best_lineage_dumps.size(); ++i)
      text << "ancestor " << i << "\n" << report.best_lineage_dumps[i] << "\n";
    write_file(out_dir / "lineage.txt", text.str());
  }

  write_file(out_dir / "flops.txt",
             u128_to_string(report.total_flops) + "\n" +
                 report.total_flops_sci + "\n");

  {
    json j;
    j["config"] = json::parse(experiment_config_to_json(report.config));
    j["trained_individuals"] = report.trained_individuals;
    if (report.final_best) {
      j["final_best"] = {
          {"individual_id", report.final_best->individual_id},
          {"validation_accuracy", report.final_best->validation_accuracy},
          {"test_accuracy", report.final_best->test_accuracy},
          {"event_index", report.final_best->event_index}};
    }
    j["total_flops"] = u128_to_string(report.total_flops);
    j["total_flops_scientific"] = report.total_flops_sci;
    j["best_lineage"] = report.best_lineage_ids;
    write_file(out_dir / "report.json", j.dump(2) + "\n");
  }
}

}  // namespace evonet
