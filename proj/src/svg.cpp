#include "lsm/svg.hpp"

#include <charconv>
#include <cmath>

namespace lsm::svg {

std::string num(double v, int decimals) {
  if (!std::isfinite(v)) return "0";
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::fixed, decimals);
  std::string s(buf, res.ptr);
  if (s.find('.') != std::string::npos) {
    while (s.back() == '0') s.pop_back();
    if (s.back() == '.') s.pop_back();
  }
  if (s == "-0") s = "0";
  return s;
}

std::string escape(std::string_view text) {
  std::string out;
  out.reserve(text.size());
  for (char c : text) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      case '\'': out += "&apos;"; break;
      default: out += c;
    }
  }
  return out;
}

Document::Document(double width, double height) : width_(width), height_(height) {}

void Document::rect(double x, double y, double w, double h, std::string_view fill, std::string_view stroke,
                    double stroke_width) {
  body_ += "<rect x=\"" + num(x) + "\" y=\"" + num(y) + "\" width=\"" + num(w) + "\" height=\"" + num(h) +
           "\" fill=\"" + escape(fill) + "\"";
  if (stroke != "none") body_ += " stroke=\"" + escape(stroke) + "\" stroke-width=\"" + num(stroke_width) + "\"";
  body_ += "/>\n";
}

void Document::circle(double cx, double cy, double r, std::string_view fill, std::string_view stroke,
                      double stroke_width) {
  body_ += "<circle cx=\"" + num(cx) + "\" cy=\"" + num(cy) + "\" r=\"" + num(r) + "\" fill=\"" + escape(fill) + "\"";
  if (stroke != "none") body_ += " stroke=\"" + escape(stroke) + "\" stroke-width=\"" + num(stroke_width) + "\"";
  body_ += "/>\n";
}

void Document::line(double x1, double y1, double x2, double y2, std::string_view stroke, double width,
                    double opacity) {
  body_ += "<line x1=\"" + num(x1) + "\" y1=\"" + num(y1) + "\" x2=\"" + num(x2) + "\" y2=\"" + num(y2) +
           "\" stroke=\"" + escape(stroke) + "\" stroke-width=\"" + num(width) + "\"";
  if (opacity < 1.0) body_ += " stroke-opacity=\"" + num(opacity) + "\"";
  body_ += "/>\n";
}

void Document::path(std::string_view d, std::string_view fill, std::string_view stroke, double stroke_width) {
  body_ += "<path d=\"" + escape(d) + "\" fill=\"" + escape(fill) + "\"";
  if (stroke != "none") body_ += " stroke=\"" + escape(stroke) + "\" stroke-width=\"" + num(stroke_width) + "\"";
  body_ += "/>\n";
}

void Document::text(double x, double y, std::string_view content, double size, std::string_view anchor,
                    std::string_view fill) {
  body_ += "<text x=\"" + num(x) + "\" y=\"" + num(y) + "\" font-size=\"" + num(size) +
           "\" font-family=\"sans-serif\" text-anchor=\"" + escape(anchor) + "\" fill=\"" + escape(fill) + "\">" +
           escape(content) + "</text>\n";
}

void Document::raw(std::string_view fragment) { body_ += fragment; }

std::string Document::str() const {
  return "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
         "<svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" width=\"" +
         num(width_) + "\" height=\"" + num(height_) + "\" viewBox=\"0 0 " + num(width_) + " " + num(height_) +
         "\">\n" + body_ + "</svg>\n";
}

}  // namespace lsm::svg
