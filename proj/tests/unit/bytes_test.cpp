#include "vicos/bytes.hpp"

#include <catch2/catch.hpp>

using namespace vicos;

TEST_CASE("hex round trip") {
  bytes b{0x00, 0x01, 0xab, 0xff};
  CHECK(to_hex(byte_view(b)) == "0001abff");
  CHECK(from_hex("0001abff") == b);
  CHECK_THROWS_AS(from_hex("abc"), std::invalid_argument);
  CHECK_THROWS_AS(from_hex("zz"), std::invalid_argument);
}

TEST_CASE("writer and reader round trip") {
  byte_writer w;
  w.u8(7);
  w.u32(0xdeadbeef);
  w.u64(1ull << 40);
  w.blob(to_bytes("hello"));
  w.blob(byte_view{});

  byte_reader r(byte_view(w.data()));
  CHECK(r.u8() == 7);
  CHECK(r.u32() == 0xdeadbeef);
  CHECK(r.u64() == (1ull << 40));
  CHECK(r.blob() == to_bytes("hello"));
  CHECK(r.blob() == bytes{});
  CHECK_NOTHROW(r.finish());
}

TEST_CASE("reader rejects truncated and trailing input") {
  byte_writer w;
  w.u32(42);
  {
    byte_reader r(byte_view(w.data()).subspan(0, 2));
    CHECK_THROWS_AS(r.u32(), decode_error);
  }
  {
    byte_reader r(byte_view(w.data()));
    r.u8();
    CHECK_THROWS_AS(r.finish(), decode_error);
  }
  {
    // length prefix pointing past the end
    byte_writer bad;
    bad.u32(100);
    byte_reader r(byte_view(bad.data()));
    CHECK_THROWS_AS(r.blob(), decode_error);
  }
}

TEST_CASE("integer encoding is big-endian") {
  byte_writer w;
  w.u32(0x01020304);
  CHECK(w.data() == bytes{1, 2, 3, 4});
}
