#include "svg_plot.hpp"

#include <algorithm>
#include <cstdio>
#include <functional>
#include <ostream>
#include <string>

namespace rsisc::cli {

namespace {

constexpr double kPanelWidth = 420;
constexpr double kPanelHeight = 300;
constexpr double kMargin = 48;

struct Series {
  std::string label;
  std::string colour;
  std::function<double(const EpochRecord&)> value;
};

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

void panel(std::ostream& out, double left, const std::string& title, const TrainHistory& h,
           const std::vector<Series>& series, double lo, double hi) {
  const double w = kPanelWidth - 2 * kMargin;
  const double ht = kPanelHeight - 2 * kMargin;
  const double x0 = left + kMargin;
  const double y0 = kMargin;
  const double last = static_cast<double>(std::max<std::size_t>(h.epochs.back().epoch, 2));
  const double first = static_cast<double>(h.epochs.front().epoch);
  auto sx = [&](double e) { return x0 + w * (e - first) / std::max(last - first, 1.0); };
  auto sy = [&](double v) { return y0 + ht * (1.0 - (v - lo) / (hi - lo)); };

  out << "<text x=\"" << num(x0 + w / 2) << "\" y=\"24\" text-anchor=\"middle\">" << title << "</text>\n";
  out << "<rect x=\"" << num(x0) << "\" y=\"" << num(y0) << "\" width=\"" << num(w) << "\" height=\"" << num(ht)
      << "\" fill=\"none\" stroke=\"#444\"/>\n";
  out << "<text x=\"" << num(x0 - 4) << "\" y=\"" << num(y0 + 4) << "\" text-anchor=\"end\">" << num(hi)
      << "</text>\n";
  out << "<text x=\"" << num(x0 - 4) << "\" y=\"" << num(y0 + ht) << "\" text-anchor=\"end\">" << num(lo)
      << "</text>\n";
  out << "<text x=\"" << num(x0 + w / 2) << "\" y=\"" << num(y0 + ht + 30)
      << "\" text-anchor=\"middle\">epoch</text>\n";
  double legend_y = y0 + 14;
  for (const auto& s : series) {
    out << "<polyline fill=\"none\" stroke=\"" << s.colour << "\" stroke-width=\"1.5\" points=\"";
    for (const auto& r : h.epochs) out << num(sx(static_cast<double>(r.epoch))) << ',' << num(sy(s.value(r))) << ' ';
    out << "\"/>\n";
    out << "<text x=\"" << num(x0 + w - 6) << "\" y=\"" << num(legend_y) << "\" text-anchor=\"end\" fill=\""
        << s.colour << "\">" << s.label << "</text>\n";
    legend_y += 14;
  }
}

}  // namespace

void write_history_svg(std::ostream& out, const TrainHistory& history) {
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << num(2 * kPanelWidth) << "\" height=\""
      << num(kPanelHeight) << "\" font-family=\"sans-serif\" font-size=\"11\">\n";
  out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  if (history.epochs.empty()) {
    out << "<text x=\"20\" y=\"30\">no epochs recorded</text>\n</svg>\n";
    return;
  }
  double max_loss = 0.0;
  for (const auto& r : history.epochs) max_loss = std::max(max_loss, r.loss);
  panel(out, 0, "training loss", history, {{"loss", "#c0392b", [](const EpochRecord& r) { return r.loss; }}}, 0.0,
        max_loss > 0.0 ? max_loss : 1.0);
  panel(out, kPanelWidth, "accuracy (%)", history,
        {{"train", "#2471a3", [](const EpochRecord& r) { return r.train_accuracy; }},
         {"validation", "#229954", [](const EpochRecord& r) { return r.val_accuracy; }}},
        0.0, 100.0);
  out << "</svg>\n";
}

}  // namespace rsisc::cli
