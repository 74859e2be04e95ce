#pragma once

// Hand-built metric fixtures shared by the unit and acceptance tests.

#include <vector>

#include "valb/corpus.hpp"

namespace fixtures {

using valb::AnnotatedLog;
using valb::Category;
using valb::Tag;

/// L1 exact, L2 right static/variable split but wrong category, L3 a
/// variable predicted static, L4 all-static exact.
inline std::pair<std::vector<AnnotatedLog>, std::vector<AnnotatedLog>> four_logs() {
  const Tag O = Tag::outside();
  std::vector<AnnotatedLog> gold = {
      {{"Starting", "executor", "ID", "5", "on", "host", "meso-07"},
       {O, O, O, Tag::begin(Category::OID), O, O, Tag::begin(Category::OBN)}},
      {{"Took", "12", "seconds"}, {O, Tag::begin(Category::TDA), O}},
      {{"Opened", "/tmp/x"}, {O, Tag::begin(Category::LOI)}},
      {{"Shutdown", "complete"}, {O, O}}};
  std::vector<AnnotatedLog> pred = gold;
  pred[1].tags[1] = Tag::begin(Category::OBA);
  pred[2].tags[1] = O;
  return {pred, gold};
}

/// Gold OID spans in three logs; predicted: one correct, one labelled LOI,
/// one missed.
inline std::pair<std::vector<AnnotatedLog>, std::vector<AnnotatedLog>> three_spans() {
  const Tag O = Tag::outside();
  const Tag oid = Tag::begin(Category::OID);
  std::vector<AnnotatedLog> gold = {
      {{"block", "blk_1", "added"}, {O, oid, O}},
      {{"block", "blk_2", "added"}, {O, oid, O}},
      {{"block", "blk_3", "added"}, {O, oid, O}}};
  std::vector<AnnotatedLog> pred = gold;
  pred[1].tags[1] = Tag::begin(Category::LOI);
  pred[2].tags[1] = O;
  return {pred, gold};
}

}  // namespace fixtures
