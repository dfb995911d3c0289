// Object-oriented cases: construction lifecycles, virtual dispatch.
#include <cstdio>

namespace {

int live_counters = 0;

class Counter {
public:
    explicit Counter(int start) : value(start) { live_counters++; }
    ~Counter() { live_counters--; }
    int bump(int by) { value += by; return value; }

private:
    int value;
};

// OO-L2-01
int ctor_lifecycle(int start) {
    int observed;
    {
        Counter a(start);
        Counter b(start * 2);
        observed = a.bump(1) + b.bump(2) + live_counters;
    }
    return observed + live_counters;
}

class Shape {
public:
    virtual ~Shape() {}
    virtual int area() const = 0;
};

class Rect : public Shape {
public:
    Rect(int w, int h) : w(w), h(h) {}
    int area() const override { return w * h; }

private:
    int w, h;
};

class Tri : public Shape {
public:
    Tri(int b, int h) : b(b), h(h) {}
    int area() const override { return b * h / 2; }

private:
    int b, h;
};

// OO-L3-01
int virtual_area(int which, int a, int b) {
    Rect rect(a, b);
    Tri tri(a, b);
    const Shape *shape = (which > 0) ? static_cast<const Shape *>(&rect)
                                     : static_cast<const Shape *>(&tri);
    return shape->area();
}

}  // namespace

int main() {
    std::printf("[OO-L2-01] result=%d\n", ctor_lifecycle(10));
    std::printf("[OO-L3-01] result=%d\n", virtual_area(1, 6, 7));
    std::printf("[OO-L3-01] result=%d\n", virtual_area(-1, 6, 7));
    return 0;
}
