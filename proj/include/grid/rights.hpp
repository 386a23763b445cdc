// Right sets with a "*" wildcard element, closed under intersection.

#ifndef GRID_RIGHTS_HPP_
#define GRID_RIGHTS_HPP_

#include <initializer_list>
#include <set>
#include <string>

#include "grid/record.hpp"

namespace grid {

class Rights {
 public:
  Rights() = default;
  Rights(std::initializer_list<std::string> items) {
    for (const auto& s : items) insert(s);
  }

  static Rights all() {
    Rights r;
    r.all_ = true;
    return r;
  }

  void insert(const std::string& op) {
    if (op == "*") {
      all_ = true;
      items_.clear();
    } else if (!all_) {
      items_.insert(op);
    }
  }

  bool is_all() const { return all_; }
  bool empty() const { return !all_ && items_.empty(); }
  const std::set<std::string>& items() const { return items_; }

  bool contains(const std::string& op) const { return all_ || items_.count(op) != 0; }

  Rights intersect(const Rights& other) const {
    if (all_) return other;
    if (other.all_) return *this;
    Rights out;
    for (const auto& op : items_)
      if (other.items_.count(op)) out.items_.insert(op);
    return out;
  }

  bool subset_of(const Rights& other) const {
    if (other.all_) return true;
    if (all_) return false;
    for (const auto& op : items_)
      if (!other.items_.count(op)) return false;
    return true;
  }

  bool operator==(const Rights& o) const { return all_ == o.all_ && items_ == o.items_; }

  Value to_value() const {
    ValueList l;
    if (all_) {
      l.push_back(Value(std::string("*")));
    } else {
      for (const auto& op : items_) l.push_back(Value(op));
    }
    return Value(std::move(l));
  }

  static Rights from_value(const Value& v) {
    Rights r;
    if (v.is_list()) {
      for (const Value& item : v.as_list())
        if (item.is_string()) r.insert(item.as_string());
    }
    return r;
  }

  std::string to_string() const {
    if (all_) return "*";
    std::string s;
    for (const auto& op : items_) {
      if (!s.empty()) s += ",";
      s += op;
    }
    return s;
  }

 private:
  bool all_ = false;
  std::set<std::string> items_;
};

}  // namespace grid

#endif  // GRID_RIGHTS_HPP_
