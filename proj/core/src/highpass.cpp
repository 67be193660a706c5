#include "hfe/highpass.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <mutex>
#include <sstream>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <spdlog/spdlog.h>

#include "hfe/checkpoint.hpp"
#include "hfe/error.hpp"
#include "hfe/optim.hpp"

namespace hfe {

namespace {

// The FFTW planner is not re-entrant; execution of distinct plans is.
std::mutex& planner_mutex() {
  static std::mutex m;
  return m;
}

Spectrum transform(const Spectrum& in, int sign) {
  if (in.height == 0 || in.width == 0) {
    throw ContractViolation("fft2: empty input");
  }
  Spectrum out{in.height, in.width, std::vector<std::complex<double>>(in.bins.size())};
  Spectrum scratch = in;
  auto* src = reinterpret_cast<fftw_complex*>(scratch.bins.data());
  auto* dst = reinterpret_cast<fftw_complex*>(out.bins.data());
  fftw_plan plan;
  {
    std::lock_guard<std::mutex> lock(planner_mutex());
    plan = fftw_plan_dft_2d(static_cast<int>(in.height), static_cast<int>(in.width),
                            src, dst, sign, FFTW_ESTIMATE);
  }
  fftw_execute(plan);
  {
    std::lock_guard<std::mutex> lock(planner_mutex());
    fftw_destroy_plan(plan);
  }
  return out;
}

Spectrum to_complex(const Plane& plane) {
  Spectrum s{plane.height, plane.width, {}};
  s.bins.assign(plane.values.begin(), plane.values.end());
  return s;
}

void append_crop(const Tensor& t, std::size_t y, std::size_t x, std::size_t h,
                 std::size_t w, std::vector<float>& out) {
  const Shape& s = t.shape();
  const auto d = t.data();
  for (std::size_t c = 0; c < s.c; ++c)
    for (std::size_t i = 0; i < h; ++i)
      for (std::size_t j = 0; j < w; ++j)
        out.push_back(d[(c * s.h + y + i) * s.w + x + j]);
}

}  // namespace

Spectrum fft2(const Plane& plane) { return transform(to_complex(plane), FFTW_FORWARD); }

Spectrum fft2(const Spectrum& signal) { return transform(signal, FFTW_FORWARD); }

Spectrum ifft2_complex(const Spectrum& spec) {
  Spectrum out = transform(spec, FFTW_BACKWARD);
  const double norm = 1.0 / static_cast<double>(spec.height * spec.width);
  for (auto& b : out.bins) b *= norm;
  return out;
}

Plane ifft2(const Spectrum& spec) {
  const Spectrum s = ifft2_complex(spec);
  Plane out(s.height, s.width);
  for (std::size_t i = 0; i < s.bins.size(); ++i) {
    out.values[i] = static_cast<float>(s.bins[i].real());
  }
  return out;
}

void HighPassSpec::validate() const {
  if (!(cutoff > 0.0 && cutoff < 1.0)) {
    throw ContractViolation("high-pass cutoff must lie in (0, 1), got " +
                            std::to_string(cutoff));
  }
}

double radial_frequency(std::size_t u, std::size_t v, std::size_t height,
                        std::size_t width) {
  auto signed_freq = [](std::size_t k, std::size_t n) {
    const double kk = static_cast<double>(k);
    const double nn = static_cast<double>(n);
    return (2 * k <= n ? kk : kk - nn) / nn;
  };
  const double fu = signed_freq(u, height);
  const double fv = signed_freq(v, width);
  return std::sqrt(fu * fu + fv * fv);
}

Plane high_pass_filter(const Plane& plane, const HighPassSpec& spec) {
  spec.validate();
  Spectrum s = fft2(plane);
  const double radius = spec.cutoff * 0.5;
  for (std::size_t u = 0; u < s.height; ++u) {
    for (std::size_t v = 0; v < s.width; ++v) {
      if (radial_frequency(u, v, s.height, s.width) < radius) s.at(u, v) = 0.0;
    }
  }
  return ifft2(s);
}

Tensor high_pass_filter(const ImageBuffer& img, const HighPassSpec& spec) {
  const std::size_t h = img.height;
  const std::size_t w = img.width;
  std::vector<float> data(img.channels * h * w);
  for (std::size_t c = 0; c < img.channels; ++c) {
    Plane p(h, w);
    for (std::size_t i = 0; i < h * w; ++i) p.values[i] = img.pixels[i * img.channels + c];
    const Plane f = high_pass_filter(p, spec);
    std::copy(f.values.begin(), f.values.end(), data.begin() + c * h * w);
  }
  return Tensor::from_data({1, img.channels, h, w}, std::move(data));
}

PhiNetwork PhiNetwork::create(std::uint64_t seed, std::size_t width,
                              HighPassSpec spec) {
  spec.validate();
  if (width < 1) throw ContractViolation("phi width must be >= 1");
  Rng rng = derive_rng(seed, 0);
  PhiNetwork phi;
  phi.conv1 = make_conv(width, 3, 3, rng);
  phi.conv2 = make_conv(width, width, 3, rng);
  phi.conv3 = make_conv(3, width, 3, rng);
  phi.spec = spec;
  return phi;
}

std::vector<Tensor> PhiNetwork::tensors() const {
  std::vector<Tensor> out;
  conv1.append_to(out);
  conv2.append_to(out);
  conv3.append_to(out);
  return out;
}

PhiActivations PhiNetwork::features(const Tensor& x) const {
  PhiActivations a;
  a.act1 = ops::relu(apply_conv(x, conv1));
  a.act2 = ops::relu(apply_conv(a.act1, conv2));
  a.output = apply_conv(a.act2, conv3);
  return a;
}

void PhiNetwork::freeze() {
  for (Tensor t : tensors()) t.set_requires_grad(false);
  frozen = true;
}

PhiNetwork PhiNetwork::clone() const {
  PhiNetwork c = *this;
  auto copy = [](const ConvParams& p) {
    ConvParams q{p.w.clone(), p.b.clone()};
    q.w.set_requires_grad(p.w.requires_grad());
    q.b.set_requires_grad(p.b.requires_grad());
    return q;
  };
  c.conv1 = copy(conv1);
  c.conv2 = copy(conv2);
  c.conv3 = copy(conv3);
  return c;
}

double phi_oracle_mse(const PhiNetwork& phi, const std::vector<ImageBuffer>& images) {
  if (images.empty()) throw ContractViolation("phi_oracle_mse: no images");
  double acc = 0.0;
  std::size_t count = 0;
  for (const ImageBuffer& raw : images) {
    const ImageBuffer img = to_rgb(raw);
    const Tensor target = high_pass_filter(img, phi.spec);
    const Tensor out = phi.forward(image_to_tensor(img));
    const auto a = out.data();
    const auto b = target.data();
    for (std::size_t i = 0; i < a.size(); ++i) {
      const double d = static_cast<double>(a[i]) - b[i];
      acc += d * d;
    }
    count += a.size();
  }
  return acc / static_cast<double>(count);
}

PhiTrainResult train_phi(const std::vector<ImageBuffer>& images,
                         const HighPassSpec& spec, const PhiTrainOptions& options) {
  if (images.empty()) throw ContractViolation("train_phi: empty dataset");
  if (options.batch_size < 1) throw ContractViolation("train_phi: batch size must be >= 1");
  spec.validate();

  std::vector<Tensor> inputs;
  std::vector<Tensor> targets;
  std::size_t crop = options.crop;
  for (const ImageBuffer& raw : images) {
    const ImageBuffer img = to_rgb(raw);
    inputs.push_back(image_to_tensor(img));
    targets.push_back(high_pass_filter(img, spec));
    crop = std::min({crop, img.height, img.width});
  }

  PhiTrainResult result;
  result.phi = PhiNetwork::create(options.seed, options.width, spec);
  result.initial_mse = phi_oracle_mse(result.phi, images);

  std::vector<Tensor> params = result.phi.tensors();
  AdamState adam = AdamState::for_params(params, {.lr = static_cast<float>(options.lr)});
  const Shape batch_shape{options.batch_size, 3, crop, crop};
  for (std::size_t step = 0; step < options.steps; ++step) {
    Rng rng = derive_rng(options.seed, step + 1);
    std::vector<float> xb;
    std::vector<float> yb;
    xb.reserve(batch_shape.numel());
    yb.reserve(batch_shape.numel());
    for (std::size_t b = 0; b < options.batch_size; ++b) {
      const std::size_t item =
          std::uniform_int_distribution<std::size_t>(0, inputs.size() - 1)(rng);
      const Shape& s = inputs[item].shape();
      const std::size_t y = std::uniform_int_distribution<std::size_t>(0, s.h - crop)(rng);
      const std::size_t x = std::uniform_int_distribution<std::size_t>(0, s.w - crop)(rng);
      append_crop(inputs[item], y, x, crop, crop, xb);
      append_crop(targets[item], y, x, crop, crop, yb);
    }
    const Tensor xt = Tensor::from_data(batch_shape, std::move(xb));
    const Tensor yt = Tensor::from_data(batch_shape, std::move(yb));

    for (Tensor& p : params) p.zero_grad();
    Tape tape;
    Tensor loss;
    {
      TapeScope scope(tape);
      loss = ops::mse_loss(result.phi.forward(xt), yt);
    }
    const float value = loss.item();
    if (!std::isfinite(value)) {
      throw NumericError("train_phi: non-finite loss at step " + std::to_string(step) +
                         " (lr " + std::to_string(options.lr) + ")");
    }
    tape.backward(loss);
    adam_step(params, adam);
    result.loss_trace.push_back(value);
    if ((step + 1) % 500 == 0) {
      spdlog::debug("train_phi step {} loss {:.6g}", step + 1, value);
    }
  }
  result.phi.freeze();
  result.final_mse = phi_oracle_mse(result.phi, images);
  return result;
}

Tensor hf_loss(const PhiNetwork& phi, const Tensor& sr, const Tensor& hr) {
  if (!phi.frozen) throw ContractViolation("hf_loss: phi must be frozen");
  if (sr.shape() != hr.shape()) {
    throw ContractViolation("hf_loss: shape mismatch " + sr.shape().str() + " vs " +
                            hr.shape().str());
  }
  // A detached copy keeps the reference branch off the tape.
  const Tensor ref = hr.clone();
  const PhiActivations a = phi.features(sr);
  const PhiActivations b = phi.features(ref);
  return ops::add(ops::l1_loss(a.act1, b.act1), ops::l1_loss(a.act2, b.act2));
}

void save_phi(const std::filesystem::path& path, const PhiNetwork& phi) {
  std::ostringstream header;
  header.precision(17);
  header << "[phi]\ncutoff = " << phi.spec.cutoff << "\nwidth = " << phi.width() << "\n";
  CheckpointContainer c;
  c.magic = "HFPH";
  c.header = header.str();
  c.tensors = phi.tensors();
  write_container(path, c);
}

PhiNetwork load_phi(const std::filesystem::path& path) {
  CheckpointContainer c = read_container(path, "HFPH");
  boost::property_tree::ptree tree;
  HighPassSpec spec;
  std::size_t width = 0;
  try {
    std::istringstream in(c.header);
    boost::property_tree::read_ini(in, tree);
    spec.cutoff = tree.get<double>("phi.cutoff");
    width = tree.get<std::size_t>("phi.width");
    spec.validate();
  } catch (const std::exception& e) {
    throw CheckpointError("header", e.what());
  }
  PhiNetwork phi = PhiNetwork::create(0, width, spec);
  std::vector<Tensor> dst = phi.tensors();
  if (c.tensors.size() != dst.size()) {
    throw CheckpointError("tensors", "expected " + std::to_string(dst.size()) +
                                         " tensors, found " +
                                         std::to_string(c.tensors.size()));
  }
  for (std::size_t i = 0; i < dst.size(); ++i) {
    if (c.tensors[i].shape() != dst[i].shape()) {
      throw CheckpointError("tensors", "tensor " + std::to_string(i) + " has shape " +
                                           c.tensors[i].shape().str() + ", expected " +
                                           dst[i].shape().str());
    }
    auto out = dst[i].mutable_data();
    auto in = c.tensors[i].data();
    std::copy(in.begin(), in.end(), out.begin());
  }
  phi.freeze();
  return phi;
}

}  // namespace hfe
