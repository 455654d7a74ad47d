#include "parajacobi/expr.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <string>

using namespace parajacobi;

TEST(Expression, Arithmetic) {
    EXPECT_DOUBLE_EQ(Expression("1 + 2 * 3")(0), 7.0);
    EXPECT_DOUBLE_EQ(Expression("(1 + 2) * 3")(0), 9.0);
    EXPECT_DOUBLE_EQ(Expression("8 / 4 / 2")(0), 1.0);
    EXPECT_DOUBLE_EQ(Expression("10 - 4 - 3")(0), 3.0);
    EXPECT_DOUBLE_EQ(Expression("1.5e2")(0), 150.0);
}

TEST(Expression, PowerBindsTighterThanUnaryMinus) {
    EXPECT_DOUBLE_EQ(Expression("-2^2")(0), -4.0);
    EXPECT_DOUBLE_EQ(Expression("2^3^2")(0), 512.0);
    EXPECT_DOUBLE_EQ(Expression("2^-1")(0), 0.5);
}

TEST(Expression, VariableAndFunctions) {
    const Expression e("(n + 1)^2 * (1 + 0.5/(n + 1))");
    for (int n = 0; n < 10; ++n) {
        const double m = n + 1.0;
        EXPECT_DOUBLE_EQ(e(n), m * m * (1 + 0.5 / m));
    }
    EXPECT_DOUBLE_EQ(Expression("sqrt(n)")(16), 4.0);
    EXPECT_NEAR(Expression("log(exp(n))")(3.25), 3.25, 1e-15);
    EXPECT_DOUBLE_EQ(Expression("pow(n + 1, -1.6)")(1), std::pow(2.0, -1.6));
    EXPECT_DOUBLE_EQ(Expression("pow(-1, n)")(3), -1.0);
}

TEST(Expression, ErrorsCarryColumn) {
    try {
        Expression("1 + * 2");
        FAIL() << "expected a parse error";
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::config);
        EXPECT_NE(std::string(e.what()).find("column"), std::string::npos);
    }
    EXPECT_THROW(Expression("foo(n)"), Error);
    EXPECT_THROW(Expression("(n + 1"), Error);
    EXPECT_THROW(Expression("pow(n)"), Error);
    EXPECT_THROW(Expression("n n"), Error);
    EXPECT_THROW(Expression(""), Error);
}

TEST(Expression, SourceKept) { EXPECT_EQ(Expression("n+1").source(), "n+1"); }
