#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <cstdlib>
#include <sstream>

#include "gftnn/io.hpp"
#include "gradient_check.hpp"

using namespace gftnn;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / "gftnn_test_io";
  fs::create_directories(dir);
  return dir / name;
}

std::vector<std::string> lines_of(const fs::path& p) {
  std::ifstream in(p);
  std::vector<std::string> out;
  for (std::string l; std::getline(in, l);) out.push_back(l);
  return out;
}

}  // namespace

TEST_CASE("format_double round trips") {
  for (double v : {0.1, -1.0 / 3.0, 6.02214076e23, 5e-324, 0.0}) CHECK(std::strtod(format_double(v).c_str(), nullptr) == v);
  CHECK(format_double(std::numeric_limits<double>::quiet_NaN()) == "nan");
  CHECK(format_double(-std::numeric_limits<double>::infinity()) == "-inf");
}

TEST_CASE("scenario archive round trip") {
  const auto scenarios = synthesize(5, 10, 3);
  const auto archive = make_archive(scenarios);
  CHECK(archive.obs_steps == 30);
  CHECK(archive.pred_steps == 50);
  const auto back = archive_from_string(archive_to_string(archive));
  REQUIRE(back.scenarios.size() == 5);
  CHECK(back.fps == 10);
  for (std::size_t i = 0; i < 5; ++i) {
    const auto& a = scenarios[i];
    const auto& b = back.scenarios[i];
    CHECK(a.id == b.id);
    CHECK(a.maneuver == b.maneuver);
    CHECK(a.v0 == b.v0);
    for (Index k = 0; k < 4; ++k) CHECK(a.features.channel(k) == b.features.channel(k));
    CHECK(a.future.x == b.future.x);
    CHECK(a.future.y == b.future.y);
  }
  CHECK(archive_to_string(archive) == archive_to_string(back));
  CHECK(back.find(scenarios[3].id).v0 == scenarios[3].v0);
  CHECK_THROWS_AS(back.find("missing"), IndexError);

  // Flattening order is (k, t, v).
  std::istringstream doc(archive_to_string(archive));
  const std::string text = doc.str();
  CHECK(text.find("\"index_order\": \"k,t,v\"") != std::string::npos);

  auto mixed = scenarios;
  mixed.push_back(synthesize(1, 25, 3)[0]);
  CHECK_THROWS_AS(make_archive(mixed), DimensionError);
}

TEST_CASE("archive schema errors") {
  CHECK_THROWS_AS(archive_from_string("{"), ParseError);
  CHECK_THROWS_AS(archive_from_string("{\"format_version\": 99}"), SchemaError);
  CHECK_THROWS_AS(archive_from_string("{\"format_version\": 1, \"fps\": 10}"), SchemaError);
  std::string text = archive_to_string(make_archive(synthesize(1, 10, 3)));
  const auto pos = text.find("\"future_y\": [") + 13;
  text.insert(pos, "1.0,");
  CHECK_THROWS_AS(archive_from_string(text), SchemaError);
  CHECK_THROWS_AS(read_archive("/nonexistent/archive.json"), IoError);
}

TEST_CASE("checkpoint round trip is bit exact") {
  Checkpoint c;
  c.config = testing::tiny_config(4);
  c.basis = make_basis(c.config);
  c.state.params = init_params(c.config, 7);
  c.state.params.values()(3) = 1.0 / 3.0;
  c.state.adam = AdamState(c.state.params.size());
  c.state.adam.first_moment.setConstant(0.1);
  c.state.adam.second_moment.setConstant(1e-300);
  c.state.adam.step = 17;
  c.state.epochs_completed = 3;
  c.train_config.learning_rate = 3e-4;
  c.train_config.seed = 99;
  c.split_ratio = 0.8;

  const std::string text = checkpoint_to_string(c);
  const Checkpoint back = checkpoint_from_string(text);
  CHECK(back.state.params.values() == c.state.params.values());
  CHECK(back.state.adam.first_moment == c.state.adam.first_moment);
  CHECK(back.state.adam.second_moment == c.state.adam.second_moment);
  CHECK(back.state.adam.step == 17);
  CHECK(back.state.epochs_completed == 3);
  CHECK(back.basis.temporal.eigenvectors == c.basis.temporal.eigenvectors);
  CHECK(back.basis.spatial.eigenvalues == c.basis.spatial.eigenvalues);
  CHECK(back.config.features == 4);
  CHECK(back.config.p == c.config.p);
  CHECK(back.config.preset == "custom");
  CHECK(back.train_config.learning_rate == 3e-4);
  CHECK(back.train_config.seed == 99);
  CHECK(back.split_ratio == 0.8);
  CHECK(checkpoint_to_string(back) == text);
  CHECK(text.find("\"parameter_count\"") != std::string::npos);
  CHECK(text.find("\"f3.b0.W_n\"") != std::string::npos);

  const auto path = scratch("ckpt.json");
  write_checkpoint(path, c);
  CHECK(read_checkpoint(path).state.params.values() == c.state.params.values());

  std::string broken = text;
  broken.replace(broken.find("\"format_version\": 1"), 19, "\"format_version\": 2");
  CHECK_THROWS_AS(checkpoint_from_string(broken), SchemaError);
}

TEST_CASE("csv writers") {
  const auto basis = testing::tiny_config().t_obs == 6 ? make_basis(testing::tiny_config()) : ProductBasis<double>{};
  const auto eig = scratch("eig.csv");
  write_eigenvalues_csv(eig, basis);
  const auto e = lines_of(eig);
  CHECK(e.front() == "axis,index,eigenvalue");
  CHECK(e.size() == 1 + 6 + 3);
  CHECK(e[1].rfind("temporal,0,", 0) == 0);
  CHECK(e.back().rfind("spatial,2,", 0) == 0);

  FeatureTensor<double> t(2, 2, 3);
  t(1, 1, 2) = 0.5;
  const auto tc = scratch("tensor.csv");
  write_tensor_csv(tc, t);
  const auto tl = lines_of(tc);
  CHECK(tl.front() == "k,l1,l2,value");
  CHECK(tl.size() == 13);
  CHECK(tl.back() == "1,1,2,0.5");

  const std::vector<EpochLog> rows{{1, 2.5, 3.5, 1.0, 2.0}, {2, 2.0, 3.0, 0.9, 1.8}};
  const auto log = scratch("log.csv");
  write_training_log(log, rows, false);
  write_training_log(log, {{3, 1.5, std::nan(""), std::nan(""), std::nan("")}}, true);
  const auto ll = lines_of(log);
  CHECK(ll.front() == "epoch,train_loss,test_loss,ade,fde");
  CHECK(ll.size() == 4);
  CHECK(ll[3] == "3,1.5,nan,nan,nan");

  const std::vector<double> v{0.1, 0.5, 0.9};
  const auto hc = scratch("hist.csv");
  write_histogram_csv(hc, histogram(v, 0.5));
  CHECK(lines_of(hc) == std::vector<std::string>{"bin_lo,bin_hi,count", "0,0.5,1", "0.5,1,2"});

  const auto trj = scratch("traj.csv");
  write_trajectory_csv(trj, decode(LatentState(0, 0, 0), 10, 4, 2), 2);
  const auto tr = lines_of(trj);
  CHECK(tr.front() == "step,t,x,y");
  CHECK(tr.size() == 6);
  CHECK(tr[1] == "0,0,0,0");
  CHECK(tr[5] == "4,2,20,0");

  const auto rep = scratch("report.json");
  const std::vector<Trajectory> one{decode(LatentState(0, 0, 0), 10, 4, 2)};
  write_report_json(rep, evaluate(one, one));
  CHECK(read_text_file(rep).find("\"ade\"") != std::string::npos);

  const auto blocker = scratch("plain_file");
  write_text_file(blocker, "x");
  CHECK_THROWS_AS(write_text_file(blocker / "sub" / "x.txt", "x"), IoError);
}
