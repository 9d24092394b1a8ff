#pragma once

#include <string>
#include <string_view>

namespace lsm::svg {

// Shortest fixed-point form with at most `decimals` fractional digits; "-0"
// prints as "0". Locale independent.
std::string num(double v, int decimals = 3);
std::string escape(std::string_view text);

// Minimal SVG 1.1 writer. Output bytes depend only on the calls made.
class Document {
 public:
  Document(double width, double height);

  void rect(double x, double y, double w, double h, std::string_view fill, std::string_view stroke = "none",
            double stroke_width = 0.0);
  void circle(double cx, double cy, double r, std::string_view fill, std::string_view stroke = "none",
              double stroke_width = 0.0);
  void line(double x1, double y1, double x2, double y2, std::string_view stroke, double width,
            double opacity = 1.0);
  void path(std::string_view d, std::string_view fill, std::string_view stroke = "none", double stroke_width = 0.0);
  void text(double x, double y, std::string_view content, double size, std::string_view anchor = "start",
            std::string_view fill = "#000000");
  void raw(std::string_view fragment);

  std::string str() const;

 private:
  double width_;
  double height_;
  std::string body_;
};

}  // namespace lsm::svg
