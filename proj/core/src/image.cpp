#include "faircl/image.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <optional>
#include <sstream>

#include "faircl/error.hpp"

#ifdef FAIRCL_WITH_OPENCV
#include <opencv2/imgcodecs.hpp>
#endif

namespace faircl {
namespace {

// Reads the next whitespace-separated token of a PNM header, skipping comments.
std::string next_token(std::istream& in) {
  std::string token;
  while (in) {
    const int c = in.peek();
    if (c == '#') {
      std::string comment;
      std::getline(in, comment);
    } else if (std::isspace(c)) {
      in.get();
    } else {
      break;
    }
  }
  in >> token;
  return token;
}

std::optional<RawImage> decode_pnm(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) return std::nullopt;
  const std::string magic = next_token(in);
  if (magic != "P5" && magic != "P6" && magic != "P2" && magic != "P3") return std::nullopt;
  RawImage img;
  std::size_t max_value = 0;
  try {
    img.width = std::stoul(next_token(in));
    img.height = std::stoul(next_token(in));
    max_value = std::stoul(next_token(in));
  } catch (const std::exception&) {
    return std::nullopt;
  }
  if (img.width == 0 || img.height == 0 || max_value == 0 || max_value > 255) return std::nullopt;
  img.channels = (magic == "P6" || magic == "P3") ? 3 : 1;
  img.pixels.resize(img.width * img.height * img.channels);
  if (magic == "P5" || magic == "P6") {
    in.get();  // single whitespace after maxval
    in.read(reinterpret_cast<char*>(img.pixels.data()), static_cast<std::streamsize>(img.pixels.size()));
    if (in.gcount() != static_cast<std::streamsize>(img.pixels.size())) return std::nullopt;
  } else {
    for (auto& p : img.pixels) {
      unsigned v = 0;
      if (!(in >> v) || v > max_value) return std::nullopt;
      p = static_cast<std::uint8_t>(v);
    }
  }
  if (max_value != 255) {
    for (auto& p : img.pixels) p = static_cast<std::uint8_t>(std::lround(p * 255.0 / static_cast<double>(max_value)));
  }
  return img;
}

}  // namespace

RawImage decode_image(const std::filesystem::path& path) {
  if (auto pnm = decode_pnm(path)) return *pnm;
#ifdef FAIRCL_WITH_OPENCV
  cv::Mat mat = cv::imread(path.string(), cv::IMREAD_COLOR);
  if (!mat.empty() && mat.depth() == CV_8U) {
    RawImage img;
    img.height = static_cast<std::size_t>(mat.rows);
    img.width = static_cast<std::size_t>(mat.cols);
    img.channels = 3;
    img.pixels.resize(img.height * img.width * 3);
    for (int y = 0; y < mat.rows; ++y) {
      const auto* row = mat.ptr<cv::Vec3b>(y);
      for (int x = 0; x < mat.cols; ++x) {
        const std::size_t base = (static_cast<std::size_t>(y) * img.width + static_cast<std::size_t>(x)) * 3;
        img.pixels[base + 0] = row[x][2];  // BGR -> RGB
        img.pixels[base + 1] = row[x][1];
        img.pixels[base + 2] = row[x][0];
      }
    }
    return img;
  }
#endif
  throw InputError("cannot decode image '" + path.string() + "'");
}

void write_pnm(const std::filesystem::path& path, const RawImage& image) {
  if (image.channels != 1 && image.channels != 3) throw InputError("write_pnm: only 1 or 3 channels");
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("cannot write '" + path.string() + "'");
  out << (image.channels == 1 ? "P5" : "P6") << '\n' << image.width << ' ' << image.height << "\n255\n";
  out.write(reinterpret_cast<const char*>(image.pixels.data()), static_cast<std::streamsize>(image.pixels.size()));
}

Tensor resize_bilinear(const Tensor& image, std::size_t height, std::size_t width) {
  if (image.rank() != 3) throw InputError("resize: expected [H, W, C], got " + shape_string(image.shape()));
  if (height == 0 || width == 0) throw InputError("resize: target size must be positive");
  const std::size_t ih = image.dim(0), iw = image.dim(1), ch = image.dim(2);
  if (ih == height && iw == width) return image;
  Tensor out({height, width, ch});
  const double sy = static_cast<double>(ih) / static_cast<double>(height);
  const double sx = static_cast<double>(iw) / static_cast<double>(width);
  for (std::size_t y = 0; y < height; ++y) {
    const double fy = std::clamp((static_cast<double>(y) + 0.5) * sy - 0.5, 0.0, static_cast<double>(ih - 1));
    const auto y0 = static_cast<std::size_t>(fy);
    const std::size_t y1 = std::min(y0 + 1, ih - 1);
    const double wy = fy - static_cast<double>(y0);
    for (std::size_t x = 0; x < width; ++x) {
      const double fx = std::clamp((static_cast<double>(x) + 0.5) * sx - 0.5, 0.0, static_cast<double>(iw - 1));
      const auto x0 = static_cast<std::size_t>(fx);
      const std::size_t x1 = std::min(x0 + 1, iw - 1);
      const double wx = fx - static_cast<double>(x0);
      for (std::size_t c = 0; c < ch; ++c) {
        auto at = [&](std::size_t yy, std::size_t xx) { return image[(yy * iw + xx) * ch + c]; };
        const double top = at(y0, x0) * (1.0 - wx) + at(y0, x1) * wx;
        const double bottom = at(y1, x0) * (1.0 - wx) + at(y1, x1) * wx;
        out[(y * width + x) * ch + c] = top * (1.0 - wy) + bottom * wy;
      }
    }
  }
  return out;
}

Tensor preprocess(const RawImage& image, const Shape& target) {
  if (target.size() != 3 || target[2] == 0) throw ConfigError("preprocess: target must be [H, W, C]");
  if (image.pixels.size() != image.height * image.width * image.channels || image.channels == 0) {
    throw InputError("preprocess: image buffer does not match its dimensions");
  }
  const std::size_t out_ch = target[2];
  Tensor scaled({image.height, image.width, out_ch});
  for (std::size_t p = 0; p < image.height * image.width; ++p) {
    const std::uint8_t* px = &image.pixels[p * image.channels];
    for (std::size_t c = 0; c < out_ch; ++c) {
      double v = 0.0;
      if (image.channels >= 3 && out_ch == 1) {
        v = 0.299 * px[0] + 0.587 * px[1] + 0.114 * px[2];
      } else if (image.channels < 3) {
        v = px[0];
      } else {
        v = px[std::min<std::size_t>(c, 2)];
      }
      scaled[p * out_ch + c] = v / 255.0;
    }
  }
  Tensor out = resize_bilinear(scaled, target[0], target[1]);
  for (double& v : out.data()) v = std::clamp(v, 0.0, 1.0);
  return out;
}

}  // namespace faircl
