#include <doctest.h>

#include <cmath>
#include <filesystem>

#include "seqdn/adam.hpp"
#include "seqdn/checkpoint.hpp"
#include "seqdn/errors.hpp"

using namespace seqdn;
using seqdn::ad::Tensor;

TEST_CASE("adam matches a hand-rolled update over several steps") {
  AdamConfig cfg;
  cfg.lr = 0.05;
  std::vector<NamedParameter> params{{"x", Tensor::vector({1.0, -2.0}, true)}};
  Adam adam(cfg);
  double x[2] = {1.0, -2.0}, m[2] = {}, v[2] = {};
  for (int step = 1; step <= 4; ++step) {
    auto& p = params[0].tensor;
    p.zero_grad();
    for (int i = 0; i < 2; ++i) {
      const double grad = 2.0 * x[i] + 0.5;
      p.mutable_grad()[i] = grad;
      m[i] = cfg.beta1 * m[i] + (1 - cfg.beta1) * grad;
      v[i] = cfg.beta2 * v[i] + (1 - cfg.beta2) * grad * grad;
      const double mh = m[i] / (1 - std::pow(cfg.beta1, step));
      const double vh = v[i] / (1 - std::pow(cfg.beta2, step));
      x[i] -= cfg.lr * mh / (std::sqrt(vh) + cfg.eps);
    }
    adam.step(params);
    for (int i = 0; i < 2; ++i) CHECK(params[0].tensor.at(i) == doctest::Approx(x[i]).epsilon(1e-13));
  }
  CHECK(adam.steps() == 4);
}

TEST_CASE("adam refuses a parameter without gradient") {
  std::vector<NamedParameter> params{{"w", Tensor::vector({1.0}, true)}};
  Adam adam;
  CHECK_THROWS_AS(adam.step(params), std::logic_error);
}

TEST_CASE("checkpoint round-trips names, shapes and exact values") {
  std::vector<NamedParameter> params{{"a", Tensor::matrix(2, 2, {0.1, -1e-300, 3.5e200, -0.0}, true)},
                                     {"b", Tensor::vector({std::nextafter(1.0, 2.0)}, true)}};
  const std::string bytes = encode_checkpoint("{\"epoch\":3}", params);
  const Checkpoint ck = decode_checkpoint(bytes);
  CHECK(ck.metadata == "{\"epoch\":3}");
  REQUIRE(ck.tensors.size() == 2);
  CHECK(ck.find("a")->shape == ad::Shape{2, 2});
  CHECK(ck.find("a")->values[2] == 3.5e200);
  CHECK(std::signbit(ck.find("a")->values[3]));
  CHECK(ck.find("b")->values[0] == std::nextafter(1.0, 2.0));

  std::vector<NamedParameter> fresh{{"a", Tensor::zeros({2, 2}, true)}, {"b", Tensor::zeros({1}, true)}};
  restore_parameters(ck, fresh);
  CHECK(fresh[0].tensor.at(0) == 0.1);
  CHECK(fresh[1].tensor.at(0) == std::nextafter(1.0, 2.0));
}

TEST_CASE("checkpoint corruption is reported") {
  std::vector<NamedParameter> params{{"a", Tensor::vector({1.0, 2.0}, true)}};
  const std::string bytes = encode_checkpoint("m", params);
  CHECK_THROWS_AS(decode_checkpoint("XXXX" + bytes.substr(4)), InputError);
  CHECK_THROWS_AS(decode_checkpoint(bytes.substr(0, bytes.size() - 3)), InputError);
  CHECK_THROWS_AS(decode_checkpoint(bytes + "z"), InputError);
  std::string wrong_version = bytes;
  wrong_version[4] = 9;
  CHECK_THROWS_AS(decode_checkpoint(wrong_version), InputError);

  const Checkpoint ck = decode_checkpoint(bytes);
  std::vector<NamedParameter> other{{"a", Tensor::zeros({3}, true)}};
  CHECK_THROWS_AS(restore_parameters(ck, other), InputError);
  std::vector<NamedParameter> missing{{"zz", Tensor::zeros({2}, true)}};
  CHECK_THROWS_AS(restore_parameters(ck, missing), InputError);
}

TEST_CASE("checkpoint file write and read") {
  const auto path = std::filesystem::temp_directory_path() / "seqdn_ck_test.sdck";
  std::vector<NamedParameter> params{{"a", Tensor::vector({4.0}, true)}};
  write_checkpoint(path, "meta", params);
  CHECK(read_checkpoint(path).find("a")->values[0] == 4.0);
  std::filesystem::remove(path);
  CHECK_THROWS_AS(read_checkpoint(path), InputError);
}
