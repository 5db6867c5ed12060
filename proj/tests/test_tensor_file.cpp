#include <cstring>
#include <string>

#include "doctest.h"
#include "sadi/error.hpp"
#include "sadi/tensor_file.hpp"
#include "support.hpp"

using namespace sadi;

namespace {

std::vector<std::byte> raw_container(const std::string& header, std::size_t data_bytes) {
  std::vector<std::byte> out(8 + header.size() + data_bytes);
  std::uint64_t n = header.size();
  for (int i = 0; i < 8; ++i) out[i] = std::byte((n >> (8 * i)) & 0xff);
  std::memcpy(out.data() + 8, header.data(), header.size());
  return out;
}

ErrorKind kind_of(const std::vector<std::byte>& bytes) {
  try {
    parse_tensor_container(bytes);
  } catch (const Error& e) {
    return e.kind();
  }
  return ErrorKind::InvalidArgument;
}

}  // namespace

TEST_SUITE("tensor_file") {
  TEST_CASE("round trip preserves shapes, values and metadata") {
    TensorContainer c;
    c.tensors["a"] = Tensor{{2, 3}, {1, -2, 3.5f, 0, -0.0f, 1e-30f}};
    c.tensors["b/c"] = Tensor{{4}, {7, 8, 9, 10}};
    c.metadata["element_class"] = "head";
    const auto bytes = serialize_tensor_container(c);
    CHECK(bytes.size() % 4 == 0);
    const auto back = parse_tensor_container(bytes);
    REQUIRE(back.tensors.size() == 2);
    CHECK(back.tensors.at("a").shape == std::vector<std::size_t>{2, 3});
    CHECK(std::memcmp(back.tensors.at("a").data.data(), c.tensors["a"].data.data(), 6 * 4) == 0);
    CHECK(back.tensors.at("b/c").data == c.tensors["b/c"].data);
    CHECK(back.metadata == c.metadata);
  }

  TEST_CASE("file round trip") {
    testing::TempDir dir;
    TensorContainer c;
    c.tensors["x"] = Tensor{{1}, {42}};
    write_tensor_file(dir / "t.safetensors", c);
    CHECK(read_tensor_file(dir / "t.safetensors").tensors.at("x").data[0] == 42.0f);
  }

  TEST_CASE("structural problems are MalformedContainer") {
    CHECK(kind_of({}) == ErrorKind::MalformedContainer);
    CHECK(kind_of(raw_container("{not json", 0)) == ErrorKind::MalformedContainer);
    CHECK(kind_of(raw_container("[]", 0)) == ErrorKind::MalformedContainer);
    CHECK(kind_of(raw_container(R"({"a":{"dtype":"F16","shape":[1],"data_offsets":[0,2]}})", 2)) ==
          ErrorKind::MalformedContainer);
    CHECK(kind_of(raw_container(R"({"a":{"dtype":"F32","shape":[2],"data_offsets":[0,4]}})", 4)) ==
          ErrorKind::MalformedContainer);
    CHECK(kind_of(raw_container(R"({"a":{"dtype":"F32","shape":[2],"data_offsets":[0,8]}})", 4)) ==
          ErrorKind::MalformedContainer);
    CHECK(kind_of(raw_container(R"({"a":{"dtype":"F32","shape":[1]}})", 4)) ==
          ErrorKind::MalformedContainer);
    auto truncated = raw_container("{}", 0);
    truncated[0] = std::byte{200};
    CHECK(kind_of(truncated) == ErrorKind::MalformedContainer);
  }

  TEST_CASE("well-formed hand-built container parses") {
    auto bytes = raw_container(R"({"w":{"dtype":"F32","shape":[1],"data_offsets":[0,4]}})", 4);
    const float v = 2.5f;
    std::memcpy(bytes.data() + bytes.size() - 4, &v, 4);
    CHECK(parse_tensor_container(bytes).tensors.at("w").data[0] == 2.5f);
  }
}
