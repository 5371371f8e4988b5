#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>

#include <Eigen/Eigenvalues>

#include "mog/errors.hpp"
#include "mog/eval.hpp"

namespace mog {

namespace {

void append(std::string& out, const char* fmt, auto... args) {
  char buf[256];
  std::snprintf(buf, sizeof buf, fmt, args...);
  out += buf;
}

std::string escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '&': out += "&amp;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

}  // namespace

std::string scatter_svg(const Points& samples, const ClassMixture& mixture,
                        const BoundingBox& box, const SvgOptions& opt) {
  const Vec2 span = box.hi - box.lo;
  const double sx = opt.width / span.x();
  const double sy = opt.height / span.y();
  const auto px = [&](double x) { return (x - box.lo.x()) * sx; };
  const auto py = [&](double y) { return (box.hi.y() - y) * sy; };  // y grows downwards

  std::string out = "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
  append(out,
         "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"%d\" height=\"%d\" "
         "viewBox=\"0 0 %d %d\">\n",
         opt.width, opt.height, opt.width, opt.height);
  if (!opt.title.empty()) out += "<title>" + escape(opt.title) + "</title>\n";
  out += "<rect x=\"0\" y=\"0\" width=\"100%\" height=\"100%\" fill=\"white\"/>\n";

  out += "<g fill=\"none\" stroke=\"" + escape(opt.ellipse_color) +
         "\" stroke-width=\"0.8\" stroke-opacity=\"0.7\">\n";
  for (const auto& c : mixture.components) {
    const Eigen::SelfAdjointEigenSolver<Mat2> eig(c.cov);
    const Vec2 major = eig.eigenvectors().col(1);
    const double rx = std::sqrt(eig.eigenvalues()(1));
    const double ry = std::sqrt(eig.eigenvalues()(0));
    // screen y is flipped, so the rotation angle changes sign
    const double angle = -std::atan2(major.y() * sy, major.x() * sx) * 180.0 / std::numbers::pi;
    append(out,
           "<ellipse cx=\"%.3f\" cy=\"%.3f\" rx=\"%.3f\" ry=\"%.3f\" "
           "transform=\"rotate(%.3f %.3f %.3f)\"/>\n",
           px(c.mean.x()), py(c.mean.y()), rx * sx, ry * sy, angle, px(c.mean.x()),
           py(c.mean.y()));
  }
  out += "</g>\n";

  out += "<g fill=\"" + escape(opt.point_color) + "\" fill-opacity=\"0.6\">\n";
  for (Eigen::Index i = 0; i < samples.cols(); ++i) {
    if (!samples.col(i).allFinite()) continue;
    append(out, "<circle cx=\"%.3f\" cy=\"%.3f\" r=\"%.2f\"/>\n", px(samples(0, i)),
           py(samples(1, i)), opt.point_radius);
  }
  out += "</g>\n</svg>\n";
  return out;
}

void render_scatter_svg(const Points& samples, const ClassMixture& mixture,
                        const BoundingBox& box, const std::filesystem::path& path,
                        const SvgOptions& options) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw FileError("cannot open " + path.string() + " for writing");
  out << scatter_svg(samples, mixture, box, options);
  if (!out) throw FileError("failed writing " + path.string());
}

}  // namespace mog
